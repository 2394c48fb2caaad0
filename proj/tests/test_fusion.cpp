#include <doctest.h>

#include "amfuse/error.hpp"
#include "amfuse/fusion.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

using namespace amfuse::fusion;
using amfuse::geom::Vec3;

namespace {

// Ray segment [t0, t1] against the voxel cube centred at c with half size h.
bool segment_hits_cube(const Point3& o, const Vec3& u, double t0, double t1, const Point3& c, double h)
{
    for (int a = 0; a < 3; ++a) {
        const double lo = c[a] - h, hi = c[a] + h;
        if (u[a] == 0.0) {
            if (o[a] < lo || o[a] >= hi)
                return false;
            continue;
        }
        double ta = (lo - o[a]) / u[a], tb = (hi - o[a]) / u[a];
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 < t1;
}

}  // namespace

TEST_CASE("weight functions")
{
    const double delta = 6.0;
    const double ds[] = {-delta, -0.5 * delta, 0.0, 0.25 * delta, 0.5 * delta, delta, 2.0 * delta};
    const double wi[] = {1.0, 1.0, 1.0, 0.75, 0.5, 0.0, 0.0};
    const double wa[] = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0};
    for (int i = 0; i < 7; ++i) {
        CAPTURE(ds[i]);
        CHECK(weight_for(ds[i], RegionKind::inactive, delta) == wi[i]);
        CHECK(weight_for(ds[i], RegionKind::active, delta) == wa[i]);
    }
    CHECK(weight_for(-0.1, RegionKind::inactive, 1.0) == 1.0);
    CHECK_THROWS_AS(weight_for(0.0, RegionKind::active, 0.0), std::invalid_argument);
}

TEST_CASE("voxel key and block mapping")
{
    SparseTsdfGrid g;
    CHECK(g.key_of({0.99, -0.99, 1.01}) == VoxelKey{0, 0, 1});
    CHECK(g.key_of({-1.01, 3.0, -3.0}) == VoxelKey{-1, 2, -1});
    CHECK(block_of({-1, 0, 7}) == VoxelKey{-1, 0, 0});
    CHECK(block_of({-8, -9, 8}) == VoxelKey{-1, -2, 1});
    CHECK(local_index({-1, 0, 0}) == 7);
    CHECK(local_index({0, -1, -1}) == 7 * 8 + 7 * 64);
    const VoxelKey k{-13, 5, 22};
    CHECK(g.key_of(g.voxel_center(k)) == k);
}

TEST_CASE("single point on a fresh grid seeds the voxels it crosses")
{
    SparseTsdfGrid g;
    const Point3 o{0, 0, 100}, hit{0, 0, 4};
    const auto stats = g.integrate_frame(o, std::span<const Point3>(&hit, 1));
    CHECK(stats.points == 1);
    const auto at_hit = g.voxel({0, 0, 2});
    REQUIRE(at_hit);
    CHECK(at_hit->D == 0.0);
    CHECK(at_hit->W == 1.0);
    const auto above = g.voxel({0, 0, 3});
    REQUIRE(above);
    CHECK(above->D == doctest::Approx(2.0));
    CHECK(above->W == doctest::Approx(1.0 - 2.0 / 6.0));
    const auto below = g.voxel({0, 0, 0});
    REQUIRE(below);
    CHECK(below->D == doctest::Approx(-4.0));
    CHECK(below->W == 1.0);
    CHECK_FALSE(g.voxel({0, 0, 6}));
    CHECK_FALSE(g.voxel({0, 0, -2}));
    CHECK_FALSE(g.voxel({1, 0, 2}));
}

TEST_CASE("weighted update from a prior")
{
    SparseTsdfGrid g;
    g.assign({1, 2, 3}, {0.5, 2.0});
    g.update_voxel({1, 2, 3}, 0.2, 1.0, false);
    const auto r = g.voxel({1, 2, 3});
    REQUIRE(r);
    CHECK(r->D == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r->W == 3.0);
}

TEST_CASE("incremental updates equal the batch weighted mean")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-6.0, 6.0), uw(0.01, 1.0);
    std::uniform_int_distribution<int> un(1, 60);
    FusionParams p;
    p.w_max = 1e12;
    SparseTsdfGrid g(p);
    double worst = 0.0;
    for (int v = 0; v < 1000; ++v) {
        const VoxelKey key{v % 10, (v / 10) % 10, v / 100};
        double sw = 0.0, swd = 0.0;
        const int n = un(rng);
        for (int i = 0; i < n; ++i) {
            const double d = ud(rng), w = uw(rng);
            g.update_voxel(key, d, w, false);
            sw += w;
            swd += w * d;
        }
        const auto r = g.voxel(key);
        REQUIRE(r);
        worst = std::max({worst, std::abs(r->D - swd / sw), std::abs(r->W - sw)});
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("repeated identical frames converge and weights saturate")
{
    SparseTsdfGrid g;
    const Point3 o{0.4, -0.3, 50}, hit{0.4, -0.3, 3.1};
    for (int i = 0; i < 200; ++i) {
        g.integrate_frame(o, std::span<const Point3>(&hit, 1));
        if (i == 9) {
            const auto r = g.voxel({0, 0, 1});
            REQUIRE(r);
            CHECK(r->W == doctest::Approx(10.0));
        }
    }
    const auto r = g.voxel({0, 0, 1});
    REQUIRE(r);
    CHECK(r->D == doctest::Approx(-1.1));
    CHECK(r->W == 128.0);
}

TEST_CASE("ray traversal visits exactly the band voxels the ray crosses")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-20.0, 20.0), uz(-5.0, 5.0);
    FusionParams p;
    p.voxel_size = 1.0;
    p.truncation = 3.0;
    for (int trial = 0; trial < 200; ++trial) {
        SparseTsdfGrid g(p);
        const Point3 o{u(rng), u(rng), 40.0 + u(rng)};
        const Point3 hit{u(rng) * 0.5, u(rng) * 0.5, uz(rng)};
        g.integrate_frame(o, std::span<const Point3>(&hit, 1));
        const Vec3 ray = hit - o;
        const double r = amfuse::geom::norm(ray);
        const Vec3 dir = ray / r;
        std::set<VoxelKey> expect, got;
        const VoxelKey lo = g.key_of(amfuse::geom::cwise_min(o, hit) - Vec3{4, 4, 4});
        const VoxelKey hi = g.key_of(amfuse::geom::cwise_max(o, hit) + Vec3{4, 4, 4});
        for (int x = lo.x; x <= hi.x; ++x)
            for (int y = lo.y; y <= hi.y; ++y)
                for (int z = lo.z; z <= hi.z; ++z) {
                    const Point3 c = g.voxel_center({x, y, z});
                    const double d = r - amfuse::geom::dot(c - o, dir);
                    if (std::abs(d) <= p.truncation && d < p.truncation &&
                        segment_hits_cube(o, dir, r - p.truncation, r + p.truncation, c, 0.5))
                        expect.insert({x, y, z});
                    if (g.voxel({x, y, z}))
                        got.insert({x, y, z});
                }
        CAPTURE(trial);
        CHECK(got == expect);
    }
}

TEST_CASE("non-finite points are skipped and counted")
{
    SparseTsdfGrid g;
    const std::vector<Point3> pts{{0, 0, 0}, {NAN, 0, 0}, {0, INFINITY, 0}};
    const auto s = g.integrate_frame({0, 0, 50}, pts);
    CHECK(s.points == 1);
    CHECK(s.skipped_nonfinite == 2);
}

TEST_CASE("active region follows the nozzle")
{
    ActiveRegion r;
    r = update_active_region(r, {10, 10, 30}, 2.4);
    CHECK(r.center == Point3{10, 10, 2.4});
    const ActiveRegion moved = update_active_region(r, {13, 10, 30}, 2.4);
    CHECK(amfuse::geom::norm(moved.center - r.center) == doctest::Approx(3.0));
    CHECK(moved.radius == r.radius);
    CHECK_FALSE(r.contains({25, 10, 2.4}));
    CHECK(r.contains({19, 10, 0}));

    SparseTsdfGrid g;
    const std::vector<Point3> pts{{25, 10, 2.4}, {12, 10, 2.4}};
    const std::vector<Point3> origins{{25, 10, 100}, {12, 10, 100}};
    const auto s = g.integrate_rays(origins, pts, &r);
    CHECK(s.active_points == 1);
}

TEST_CASE("active region lets a changed surface replace stale history")
{
    SparseTsdfGrid active_grid, plain_grid;
    const Point3 o{0, 0, 100};
    const Point3 before{0, 0, 3.0}, after{0, 0, 3.8};
    ActiveRegion region;
    region.center = {0, 0, 3};
    for (int i = 0; i < 10; ++i) {
        active_grid.integrate_frame(o, std::span<const Point3>(&before, 1), &region);
        plain_grid.integrate_frame(o, std::span<const Point3>(&before, 1));
    }
    active_grid.integrate_frame(o, std::span<const Point3>(&after, 1), &region);
    plain_grid.integrate_frame(o, std::span<const Point3>(&after, 1));
    // voxel z = 4: true distance after the step is 0.2
    const auto a = active_grid.voxel({0, 0, 2});
    const auto b = plain_grid.voxel({0, 0, 2});
    REQUIRE(a);
    REQUIRE(b);
    CHECK(std::abs(a->D - 0.2) < 0.3);
    CHECK(std::abs(b->D - 0.2) > 0.6);
    CHECK(a->W == doctest::Approx(1.5));
}

TEST_CASE("noise in inactive regions averages down like 1/sqrt(n)")
{
    FusionParams p;
    p.voxel_size = 1.0;
    p.truncation = 3.0;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 0.1);
    auto spread = [&](int n) {
        SparseTsdfGrid g(p);
        std::vector<Point3> origins, pts;
        for (int f = 0; f < n; ++f) {
            origins.clear();
            pts.clear();
            for (int x = 0; x < 40; ++x)
                for (int y = 0; y < 40; ++y) {
                    origins.push_back({double(x), double(y), 50.0});
                    pts.push_back({double(x), double(y), 4.3 + noise(rng)});
                }
            g.integrate_rays(origins, pts);
        }
        double s = 0.0, s2 = 0.0;
        for (int x = 0; x < 40; ++x)
            for (int y = 0; y < 40; ++y) {
                const double D = g.voxel({x, y, 4})->D;
                s += D;
                s2 += D * D;
            }
        const double m = s / 1600.0;
        return std::sqrt(s2 / 1600.0 - m * m);
    };
    const double s4 = spread(4), s16 = spread(16), s64 = spread(64);
    CHECK(s16 / s4 == doctest::Approx(0.5).epsilon(0.25));
    CHECK(s64 / s4 == doctest::Approx(0.25).epsilon(0.25));
}

TEST_CASE("snapshots are copy on write")
{
    SparseTsdfGrid g;
    CHECK(g.snapshot().block_count() == 0);
    std::vector<Point3> origins, pts;
    for (int i = 0; i < 50; ++i) {
        origins.push_back({i * 0.7, 3.0, 80.0});
        pts.push_back({i * 0.7, 3.0, 1.0});
    }
    g.integrate_rays(origins, pts);
    const GridView v1 = g.snapshot();
    const GridView v2 = g.snapshot();
    REQUIRE(v1.block_count() == v2.block_count());
    for (std::size_t i = 0; i < v1.blocks().size(); ++i) {
        CHECK(v1.blocks()[i].key == v2.blocks()[i].key);
        CHECK(v1.blocks()[i].block->D == v2.blocks()[i].block->D);
    }
    std::vector<LeafBlock> copy;
    for (const auto& e : v1.blocks())
        copy.push_back(*e.block);
    for (auto& p : pts)
        p.z = 2.5;
    for (int f = 0; f < 100; ++f)
        g.integrate_rays(origins, pts);
    REQUIRE(v1.block_count() == copy.size());
    bool unchanged = true;
    for (std::size_t i = 0; i < copy.size(); ++i)
        unchanged = unchanged && v1.blocks()[i].block->D == copy[i].D && v1.blocks()[i].block->W == copy[i].W;
    CHECK(unchanged);
    const auto now = g.snapshot().voxel({0, 2, 1});
    REQUIRE(now);
    CHECK(now->D != v1.voxel({0, 2, 1})->D);
}

TEST_CASE("concurrent ingestion of disjoint streams matches sequential")
{
    auto stream = [](int s, std::vector<Point3>& o, std::vector<Point3>& p, int frame) {
        o.clear();
        p.clear();
        for (int i = 0; i < 640; ++i) {
            const double x = s * 100.0 + i * 0.09;
            o.push_back({x, 0.5 * s, 100.0});
            p.push_back({x, 0.5 * s, 2.0 + 0.01 * frame + 0.3 * std::sin(i * 0.05)});
        }
    };
    SparseTsdfGrid seq, par;
    for (int s = 0; s < 3; ++s)
        for (int f = 0; f < 20; ++f) {
            std::vector<Point3> o, p;
            stream(s, o, p, f);
            seq.integrate_rays(o, p);
        }
    std::vector<std::thread> threads;
    for (int s = 0; s < 3; ++s)
        threads.emplace_back([&, s] {
            std::vector<Point3> o, p;
            for (int f = 0; f < 20; ++f) {
                stream(s, o, p, f);
                par.integrate_rays(o, p);
            }
        });
    for (auto& t : threads)
        t.join();
    const GridView a = seq.snapshot(), b = par.snapshot();
    REQUIRE(a.block_count() == b.block_count());
    bool same = true;
    for (std::size_t i = 0; i < a.blocks().size(); ++i)
        same = same && a.blocks()[i].key == b.blocks()[i].key && a.blocks()[i].block->D == b.blocks()[i].block->D &&
               a.blocks()[i].block->W == b.blocks()[i].block->W;
    CHECK(same);
}

TEST_CASE("only blocks near the surface are allocated")
{
    SparseTsdfGrid g;
    std::vector<Point3> origins, pts;
    for (double x = 0; x < 100; x += 0.5)
        for (double y = 0; y < 100; y += 0.5) {
            origins.push_back({x, y, 200});
            pts.push_back({x, y, 10});
        }
    g.integrate_rays(origins, pts);
    const double vs = 2.0, delta = 6.0;
    const double bound = (100.0 * 100.0 / (vs * vs)) * (2.0 * delta / vs) * 8.0 / 512.0;
    CHECK(static_cast<double>(g.block_count()) <= bound);
    CHECK(g.block_count() <= 7 * 7 * 2);
}

TEST_CASE("interpolation and surface height")
{
    FusionParams p;
    p.voxel_size = 1.0;
    p.truncation = 3.0;
    SparseTsdfGrid g(p);
    for (int x = -3; x <= 3; ++x)
        for (int y = -3; y <= 3; ++y)
            for (int z = -3; z <= 8; ++z)
                g.assign({x, y, z}, {z - (2.35 + 0.1 * x), 1.0});
    const GridView v = g.snapshot();
    const auto d = v.interpolate({0.25, 0.5, 2.0});
    REQUIRE(d);
    CHECK(*d == doctest::Approx(2.0 - 2.35 - 0.025));
    CHECK_FALSE(v.interpolate({2.5, 0, 0}).has_value() == false);
    CHECK_FALSE(v.interpolate({3.5, 0, 0}).has_value());
    const auto h = v.surface_height(1.0, 0.0, 3.0, 4.0);
    REQUIRE(h);
    CHECK(*h == doctest::Approx(2.45));
    CHECK_FALSE(v.surface_height(10.0, 0.0, 3.0, 4.0));
}

TEST_CASE("grid file round trip")
{
    SparseTsdfGrid g;
    std::vector<Point3> origins, pts;
    for (int i = 0; i < 300; ++i) {
        origins.push_back({i * 0.31 - 40.0, -i * 0.17, 90.0});
        pts.push_back({i * 0.31 - 40.0, -i * 0.17, 0.5 * std::sin(i * 0.1)});
    }
    g.integrate_rays(origins, pts);
    const GridView v = g.snapshot();
    const auto path = std::filesystem::temp_directory_path() / "amfuse_grid_test.atsd";
    save_grid(path, v);
    const GridView back = load_grid(path);
    CHECK(back.voxel_size() == v.voxel_size());
    CHECK(back.truncation() == v.truncation());
    REQUIRE(back.block_count() == v.block_count());
    double worst = 0.0;
    for (std::size_t i = 0; i < v.blocks().size(); ++i) {
        CHECK(back.blocks()[i].key == v.blocks()[i].key);
        for (std::size_t k = 0; k < 512; ++k) {
            worst = std::max(worst, std::abs(back.blocks()[i].block->D[k] - v.blocks()[i].block->D[k]));
            worst = std::max(worst, std::abs(back.blocks()[i].block->W[k] - v.blocks()[i].block->W[k]));
        }
    }
    CHECK(worst < 1e-5);
    {
        std::ofstream bad(path, std::ios::binary);
        bad << "NOPE";
    }
    CHECK_THROWS_AS(load_grid(path), amfuse::ParseError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_grid("/nonexistent/grid.atsd"), amfuse::IoError);
}
