#include <doctest.h>

#include "amfuse/reference.hpp"
#include "amfuse/scansim.hpp"

#include <cmath>
#include <numbers>

using namespace amfuse;
using namespace amfuse::reference;
using deposition::DepositionModel;
using deposition::HeightField;
using toolpath::Segment;
using toolpath::SegmentType;
using toolpath::Toolpath;

namespace {

Toolpath straight(double length, double speed)
{
    return Toolpath({Segment{{0, 0, 0}, {length, 0, 0}, SegmentType::infill, speed, 0.0, 0, false}});
}

double mean_interior(const HeightField& h, double cx, double cy, double half)
{
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < h.ny(); ++j)
        for (std::size_t i = 0; i < h.nx(); ++i)
            if (std::abs(h.center_x(i) - cx) <= half && std::abs(h.center_y(j) - cy) <= half) {
                s += h.at(i, j);
                ++n;
            }
    return s / static_cast<double>(n);
}

// Closed-form height of a straight pass along +x from 0 to L at y = 0.
double exact_pass(const DepositionModel& m, double v, double L, double x, double y)
{
    const double s = m.sigma;
    return m.amplitude / v * std::exp(-y * y / (2 * s * s)) * s * std::sqrt(std::numbers::pi / 2.0) *
           (std::erf(x / (s * std::numbers::sqrt2)) - std::erf((x - L) / (s * std::numbers::sqrt2)));
}

}  // namespace

TEST_CASE("a zero-time reference is empty")
{
    const Toolpath tp = straight(30.0, 30.0);
    const auto ref = build_reference_at(tp, DepositionModel{}, 0.0);
    CHECK(ref.empty());
    CHECK(ref.height.max_height() == 0.0);
    CHECK_THROWS_AS(reference_mesh(ref), std::invalid_argument);
}

TEST_CASE("straight pass peak matches the line integral")
{
    const Toolpath tp = straight(120.0, 30.0);
    DepositionModel m;
    ReferenceOptions o;
    o.cell = 0.25;
    const auto ref = build_reference_at(tp, m, tp.total_duration(), o);
    const double peak = m.amplitude / 30.0 * std::sqrt(2.0 * std::numbers::pi) * m.sigma;
    double best = 0.0;
    for (std::size_t j = 0; j < ref.height.ny(); ++j)
        for (std::size_t i = 0; i < ref.height.nx(); ++i)
            if (std::abs(ref.height.center_x(i) - 60.0) < 0.5)
                best = std::max(best, ref.height.at(i, j) * std::exp(ref.height.center_y(j) * ref.height.center_y(j) /
                                                                     (2 * m.sigma * m.sigma)));
    CHECK(best == doctest::Approx(peak).epsilon(0.01));
}

TEST_CASE("halving the quadrature step cuts the field error by at least 1.8x")
{
    DepositionModel m;
    m.cutoff_sigmas = 6.0;
    const double v = 30.0, L = 60.0;
    const Toolpath tp = straight(L, v);
    auto l1_error = [&](double step_sigmas) {
        ReferenceOptions o;
        o.step_sigmas = step_sigmas;
        o.max_dt = 10.0;
        o.roi_margin = 25.0;
        const auto ref = build_reference_at(tp, m, tp.total_duration(), o);
        double e = 0.0;
        const auto& h = ref.height;
        for (std::size_t j = 0; j < h.ny(); ++j)
            for (std::size_t i = 0; i < h.nx(); ++i)
                e += std::abs(h.at(i, j) - exact_pass(m, v, L, h.center_x(i), h.center_y(j)));
        return e * h.cell() * h.cell();
    };
    const double e1 = l1_error(2.0), e2 = l1_error(1.0), e3 = l1_error(0.5);
    CAPTURE(e1);
    CAPTURE(e2);
    CAPTURE(e3);
    CHECK(e1 / e2 >= 1.8);
    CHECK(e2 / e3 >= 1.8);
}

TEST_CASE("raster layers gain 0.8 mm each and never lose height")
{
    const Toolpath tp = toolpath::parse_toolpath(AMFUSE_FIXTURE_DIR "/square_raster_3layer.csv");
    ReferenceBuilder b(tp, DepositionModel{});
    REQUIRE(b.layers().size() == 3);
    double prev_mean = 0.0;
    HeightField prev;
    for (int k = 0; k < 3; ++k) {
        const auto ref = b.at_layer(k);
        CHECK(ref.layer == k);
        const double mean = mean_interior(ref.height, 15.0, 15.0, 7.0);
        CAPTURE(k);
        CHECK(mean - prev_mean == doctest::Approx(0.8).epsilon(0.05));
        prev_mean = mean;
        if (k > 0) {
            bool monotone = true;
            for (std::size_t i = 0; i < prev.values().size(); ++i)
                monotone = monotone && ref.height.values()[i] >= prev.values()[i];
            CHECK(monotone);
        }
        prev = ref.height;
    }
    CHECK_THROWS_AS(b.at_layer(3), std::out_of_range);
    CHECK_THROWS_AS(b.at_time(0.0), std::invalid_argument);
    CHECK_THROWS_AS(b.at_time(1e6), std::out_of_range);
}

TEST_CASE("volume equals A 2 pi sigma^2 times the zeta-weighted spray time")
{
    const Toolpath tp = toolpath::parse_toolpath(AMFUSE_FIXTURE_DIR "/twisted_raster_10layer.csv");
    DepositionModel m;
    const auto ref = build_reference(tp, m, 1);
    const double expect = m.amplitude * 2.0 * std::numbers::pi * m.sigma * m.sigma * ref.zeta_time;
    CHECK(ref.height.volume() == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("vertical distance field")
{
    HeightField h(-20, -20, 0.5, 80, 80);
    for (double& v : h.values())
        v = 2.4;
    const geom::Aabb roi{{-10, -10, 0}, {10, 10, 0}};
    const auto g = vertical_tsdf(h, roi, 2.0, 6.0);
    CHECK(g.voxel({0, 0, 1})->D == doctest::Approx(-0.4));
    CHECK(g.voxel({3, -2, 4})->D == doctest::Approx(5.6));
    CHECK_FALSE(g.voxel({0, 0, 5}));
    CHECK_FALSE(g.voxel({0, 0, -2}));
    CHECK_FALSE(g.voxel({8, 0, 0}));
    CHECK(*g.interpolate({1.0, 1.0, 2.4}) == doctest::Approx(0.0).epsilon(1e-12));

    ReferenceModel ref;
    ref.zeta_time = 1.0;
    ref.height = h;
    ref.roi = roi;
    ref.grid = g;
    const auto mesh = reference_mesh(ref);
    REQUIRE_FALSE(mesh.empty());
    for (const auto& p : mesh.vertices)
        CHECK(p.z == doctest::Approx(2.4).epsilon(0.05 / 2.4));
    CHECK(mesh.bounds().min.x <= roi.min.x);
    CHECK(mesh.bounds().max.y >= roi.max.y);
}

TEST_CASE("twisted tower reference mesh")
{
    const Toolpath tp = toolpath::parse_toolpath(AMFUSE_FIXTURE_DIR "/twisted_raster_10layer.csv");
    ReferenceOptions o;
    const auto ref = build_reference(tp, DepositionModel{}, 9, o);
    const auto m = reference_mesh(ref);
    const auto e = mesh::edge_incidence(m);
    CHECK(e.non_manifold == 0);
    CHECK(e.inconsistent == 0);
    // the only rim is the border of the region of interest
    const auto rim = mesh::boundary_vertices(m);
    const double slack = 2.0 * o.voxel_size;
    std::size_t interior_rim = 0;
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
        if (!rim[v])
            continue;
        const auto& p = m.vertices[v];
        const bool near_border = p.x < ref.roi.min.x + slack || p.x > ref.roi.max.x - slack ||
                                 p.y < ref.roi.min.y + slack || p.y > ref.roi.max.y - slack;
        interior_rim += near_border ? 0 : 1;
    }
    CHECK(interior_rim == 0);
    const auto fp = ref.roi.extent();
    CHECK(m.area() > fp.x * fp.y);
    const auto vn = m.vertex_normals();
    std::size_t downward = 0;
    for (const auto& n : vn)
        downward += n.z < 0.0 ? 1 : 0;
    CHECK(downward == 0);
    CHECK(ref.height.max_height() > 7.0);
}

TEST_CASE("reference agrees with the simulator truth")
{
    const Toolpath tp = toolpath::parse_toolpath(AMFUSE_FIXTURE_DIR "/square_raster_3layer.csv");
    scansim::SimulationConfig cfg;
    cfg.profilers.resize(1);
    const auto sim = scansim::run_simulation(tp, cfg, std::filesystem::temp_directory_path() / "amfuse_reference_sim");
    const auto ref = build_reference(tp, cfg.model, 2);
    const auto m = reference_mesh(ref);
    double gap = 0.0;
    for (const auto& p : m.vertices)
        gap += std::abs(p.z - sim.truth.sample(p.x, p.y));
    gap /= static_cast<double>(m.vertices.size());
    CHECK(gap <= 0.1);
}
