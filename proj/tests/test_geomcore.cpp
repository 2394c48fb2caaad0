#include <doctest.h>

#include "amfuse/error.hpp"
#include "amfuse/geomcore.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace amfuse::geom;

namespace {

void check_close(const Vec3& a, const Vec3& b, double tol = 1e-9)
{
    CHECK(std::abs(a.x - b.x) <= tol);
    CHECK(std::abs(a.y - b.y) <= tol);
    CHECK(std::abs(a.z - b.z) <= tol);
}

RigidTransform random_transform(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> ang(-180.0, 180.0), tr(-100.0, 100.0);
    return compose(RigidTransform::translation({tr(rng), tr(rng), tr(rng)}),
                   compose(RigidTransform::rotation_z(ang(rng)),
                           compose(RigidTransform::rotation_y(ang(rng)), RigidTransform::rotation_x(ang(rng)))));
}

}  // namespace

TEST_CASE("compose with identity and inverse")
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const RigidTransform t = random_transform(rng);
        const RigidTransform a = compose(RigidTransform::identity(), t);
        const RigidTransform id = compose(t, invert(t));
        for (int k = 0; k < 9; ++k) {
            CHECK(std::abs(a.rotation().m[k] - t.rotation().m[k]) <= 1e-12);
            CHECK(std::abs(id.rotation().m[k] - Mat3::identity().m[k]) <= 1e-9);
        }
        CHECK(norm(id.translation()) <= 1e-9);
    }
}

TEST_CASE("compose order: rotate after translate")
{
    const RigidTransform t = compose(RigidTransform::rotation_z(90.0), RigidTransform::translation({1, 0, 0}));
    const Point3 p = t.apply({0, 0, 0});
    CHECK(std::abs(p.x - 0.0) <= 1e-12);
    CHECK(std::abs(p.y - 1.0) <= 1e-12);
    CHECK(std::abs(p.z) <= 1e-12);
}

TEST_CASE("compose is associative")
{
    std::mt19937_64 rng(2);
    const RigidTransform a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
    const auto l = compose(compose(a, b), c).to_matrix();
    const auto r = compose(a, compose(b, c)).to_matrix();
    for (int k = 0; k < 16; ++k)
        CHECK(std::abs(l[static_cast<std::size_t>(k)] - r[static_cast<std::size_t>(k)]) <= 1e-9);
}

TEST_CASE("project_points examples")
{
    const std::vector<Point3> one{{1, 2, 3}};
    auto out = project_points(RigidTransform::identity(), RigidTransform::identity(), one);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == Point3{1, 2, 3});

    out = project_points(RigidTransform::identity(), RigidTransform::translation({0, 0, 100}),
                         std::vector<Point3>{{0, 0, -100}});
    CHECK(norm(out[0]) <= 1e-12);

    // R = rotZ(180), pose t = (10,0,0); calib t = (0,5,0).
    // (1,0,0) -> calib (1,5,0) -> rot (-1,-5,0) -> +(10,0,0) = (9,-5,0)
    const RigidTransform pose = compose(RigidTransform::translation({10, 0, 0}), RigidTransform::rotation_z(180.0));
    out = project_points(pose, RigidTransform::translation({0, 5, 0}), std::vector<Point3>{{1, 0, 0}});
    check_close(out[0], {9, -5, 0}, 1e-9);
}

TEST_CASE("project_points matches composed apply and preserves distances")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const RigidTransform pose = random_transform(rng), calib = random_transform(rng);
    std::vector<Point3> pts(257);
    for (auto& p : pts)
        p = {u(rng), u(rng), u(rng)};
    const auto out = project_points(pose, calib, pts);
    REQUIRE(out.size() == pts.size());
    const RigidTransform chain = compose(pose, calib);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        check_close(out[i], chain.apply(pts[i]), 1e-9);
        if (i > 0)
            CHECK(std::abs(norm(out[i] - out[i - 1]) - norm(pts[i] - pts[i - 1])) <= 1e-9);
    }
}

TEST_CASE("project_points rejects non-finite input")
{
    const std::vector<Point3> bad{{0, 0, 0}, {std::nan(""), 0, 0}};
    CHECK_THROWS_AS(project_points(RigidTransform::identity(), RigidTransform::identity(), bad), std::invalid_argument);
}

TEST_CASE("rigid transform validation")
{
    Mat3 scaled;
    scaled.m = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_AS(RigidTransform(scaled, {}), std::invalid_argument);
    Mat3 reflect;
    reflect.m = {-1, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_AS(RigidTransform(reflect, {}), std::invalid_argument);
    CHECK_THROWS_AS(RigidTransform::from_calibration(reflect, {}), std::invalid_argument);
}

TEST_CASE("calibration re-orthogonalizes near-rotations and rejects worse")
{
    Mat3 r = RigidTransform::rotation_z(30.0).rotation();
    Mat3 near = r;
    near.m[1] += 3e-7;
    const RigidTransform t = RigidTransform::from_calibration(near, {1, 2, 3});
    CHECK(orthonormality_error(t.rotation()) <= 1e-12);
    CHECK(std::abs(t.rotation().determinant() - 1.0) <= 1e-12);

    Mat3 far = r;
    far.m[1] += 1e-3;
    CHECK_THROWS_AS(RigidTransform::from_calibration(far, {}), std::invalid_argument);
}

TEST_CASE("calibration file round trip")
{
    const auto path = std::filesystem::temp_directory_path() / "amfuse_calib_test.json";
    CalibrationSet in;
    in[0] = compose(RigidTransform::translation({0, -7, 100}), RigidTransform::rotation_x(180.0));
    in[2] = RigidTransform::rotation_y(10.0);
    save_calibration(path, in);
    const CalibrationSet out = load_calibration(path);
    REQUIRE(out.size() == 2);
    for (const auto& [id, t] : in) {
        const auto a = t.to_matrix(), b = out.at(id).to_matrix();
        for (int k = 0; k < 16; ++k)
            CHECK(std::abs(a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]) <= 1e-12);
    }
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_calibration("/nonexistent/calib.json"), amfuse::IoError);
    {
        std::ofstream bad(path);
        bad << R"({"scanners":[{"id":0,"rotation":[1,0,0],"translation_mm":[0,0,0]}]})";
    }
    CHECK_THROWS_AS(load_calibration(path), amfuse::ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("aabb overlap")
{
    Aabb a{{0, 0, 0}, {4, 4, 1}}, b{{2, 1, 5}, {6, 3, 6}};
    CHECK(a.xy_overlap_area(b) == doctest::Approx(4.0));
    CHECK(a.overlap_volume(b) == 0.0);
    Aabb c{{1, 1, 0.5}, {2, 2, 3}};
    CHECK(a.overlap_volume(c) == doctest::Approx(0.5));
    CHECK(Aabb::empty().is_empty());
    CHECK(a.squared_distance({5, 2, 0.5}) == doctest::Approx(1.0));
}
