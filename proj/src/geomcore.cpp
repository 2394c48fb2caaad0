#include "amfuse/geomcore.hpp"

#include "amfuse/error.hpp"
#include "amfuse/simd/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace amfuse::geom {

namespace {

constexpr double kRigidTol = 1e-9;
constexpr double kCalibrationTol = 1e-6;

Mat3 rotation_about(int axis, double degrees)
{
    const double a = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    switch (axis) {
    case 0: r.m = {1, 0, 0, 0, c, -s, 0, s, c}; break;
    case 1: r.m = {c, 0, s, 0, 1, 0, -s, 0, c}; break;
    default: r.m = {c, -s, 0, s, c, 0, 0, 0, 1}; break;
    }
    return r;
}

Mat3 inverse(const Mat3& a)
{
    const double det = a.determinant();
    Mat3 inv;
    inv(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) / det;
    inv(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) / det;
    inv(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) / det;
    inv(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) / det;
    inv(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) / det;
    inv(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) / det;
    inv(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) / det;
    inv(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) / det;
    inv(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / det;
    return inv;
}

void check_rotation(const Mat3& r)
{
    for (double v : r.m)
        if (!std::isfinite(v))
            throw std::invalid_argument("rotation has non-finite entries");
    if (orthonormality_error(r) > kRigidTol)
        throw std::invalid_argument("rotation is not orthonormal");
    if (std::abs(r.determinant() - 1.0) > kRigidTol)
        throw std::invalid_argument("rotation determinant is not +1");
}

}  // namespace

Mat3 Mat3::transposed() const
{
    Mat3 t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            t(r, c) = (*this)(c, r);
    return t;
}

double Mat3::determinant() const
{
    const Mat3& a = *this;
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Mat3 Mat3::operator*(const Mat3& o) const
{
    Mat3 p;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            p(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) + (*this)(r, 2) * o(2, c);
    return p;
}

Vec3 Mat3::operator*(const Vec3& v) const
{
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

double orthonormality_error(const Mat3& r)
{
    const Mat3 g = r.transposed() * r;
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

Mat3 polar_orthonormalize(const Mat3& r)
{
    Mat3 x = r;
    for (int it = 0; it < 50; ++it) {
        const Mat3 inv_t = inverse(x).transposed();
        Mat3 next;
        for (std::size_t k = 0; k < 9; ++k)
            next.m[k] = 0.5 * (x.m[k] + inv_t.m[k]);
        double change = 0.0;
        for (std::size_t k = 0; k < 9; ++k)
            change = std::max(change, std::abs(next.m[k] - x.m[k]));
        x = next;
        if (change < 1e-15)
            break;
    }
    return x;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation)
{
    check_rotation(rotation_);
    if (!is_finite(translation_))
        throw std::invalid_argument("translation has non-finite entries");
}

RigidTransform RigidTransform::translation(const Vec3& t) { return {Mat3::identity(), t}; }
RigidTransform RigidTransform::rotation_x(double degrees) { return {rotation_about(0, degrees), {}}; }
RigidTransform RigidTransform::rotation_y(double degrees) { return {rotation_about(1, degrees), {}}; }
RigidTransform RigidTransform::rotation_z(double degrees) { return {rotation_about(2, degrees), {}}; }

RigidTransform RigidTransform::from_calibration(const Mat3& rotation, const Vec3& translation)
{
    for (double v : rotation.m)
        if (!std::isfinite(v))
            throw std::invalid_argument("calibration rotation has non-finite entries");
    const double err = orthonormality_error(rotation);
    if (err > kCalibrationTol)
        throw std::invalid_argument("calibration rotation deviates from orthonormal by " + std::to_string(err));
    if (rotation.determinant() < 0.0)
        throw std::invalid_argument("calibration rotation is a reflection");
    return {err > kRigidTol ? polar_orthonormalize(rotation) : rotation, translation};
}

std::array<double, 16> RigidTransform::to_matrix() const
{
    const auto& r = rotation_.m;
    return {r[0], r[1], r[2], translation_.x, r[3], r[4], r[5], translation_.y,
            r[6], r[7], r[8], translation_.z, 0.0,  0.0,  0.0,  1.0};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b)
{
    // Products of exact rotations drift by ulps; re-project when the chain
    // grows long enough to approach the validation tolerance.
    Mat3 r = a.rotation() * b.rotation();
    if (orthonormality_error(r) > 1e-12)
        r = polar_orthonormalize(r);
    return {r, a.rotation() * b.translation() + a.translation()};
}

RigidTransform invert(const RigidTransform& a)
{
    const Mat3 rt = a.rotation().transposed();
    return {rt, -(rt * a.translation())};
}

std::vector<Point3> project_points(const RigidTransform& pose_OB, const RigidTransform& calib_BL,
                                   std::span<const Point3> local_points)
{
    const std::size_t n = local_points.size();
    std::vector<double> xs(n), ys(n), zs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point3& p = local_points[i];
        if (!is_finite(p))
            throw std::invalid_argument("project_points: non-finite point at index " + std::to_string(i));
        xs[i] = p.x;
        ys[i] = p.y;
        zs[i] = p.z;
    }
    const RigidTransform chain = compose(pose_OB, calib_BL);
    double r[9];
    std::copy(chain.rotation().m.begin(), chain.rotation().m.end(), r);
    const double t[3] = {chain.translation().x, chain.translation().y, chain.translation().z};
    simd::rigid_transform(r, t, xs, ys, zs);

    std::vector<Point3> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = {xs[i], ys[i], zs[i]};
    return out;
}

Aabb Aabb::empty()
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {{inf, inf, inf}, {-inf, -inf, -inf}};
}

void Aabb::expand(const Point3& p)
{
    min = cwise_min(min, p);
    max = cwise_max(max, p);
}

double Aabb::xy_overlap_area(const Aabb& o) const
{
    if (is_empty() || o.is_empty())
        return 0.0;
    const double dx = std::min(max.x, o.max.x) - std::max(min.x, o.min.x);
    const double dy = std::min(max.y, o.max.y) - std::max(min.y, o.min.y);
    return (dx > 0.0 && dy > 0.0) ? dx * dy : 0.0;
}

double Aabb::overlap_volume(const Aabb& o) const
{
    const double area = xy_overlap_area(o);
    if (area <= 0.0)
        return 0.0;
    const double dz = std::min(max.z, o.max.z) - std::max(min.z, o.min.z);
    return dz > 0.0 ? area * dz : 0.0;
}

double Aabb::squared_distance(const Point3& p) const
{
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double v = p[a];
        if (v < min[a])
            s += (min[a] - v) * (min[a] - v);
        else if (v > max[a])
            s += (v - max[a]) * (v - max[a]);
    }
    return s;
}

CalibrationSet load_calibration(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open calibration file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("calibration file " + path.string() + ": " + e.what());
    }
    CalibrationSet out;
    try {
        for (const auto& entry : doc.at("scanners")) {
            const int id = entry.at("id").get<int>();
            const auto rot = entry.at("rotation").get<std::vector<double>>();
            const auto tr = entry.at("translation_mm").get<std::vector<double>>();
            if (rot.size() != 9 || tr.size() != 3)
                throw ParseError("calibration entry " + std::to_string(id) + ": expected 9 rotation and 3 translation values");
            Mat3 r;
            std::copy(rot.begin(), rot.end(), r.m.begin());
            if (out.count(id))
                throw ParseError("calibration: duplicate scanner id " + std::to_string(id));
            out.emplace(id, RigidTransform::from_calibration(r, {tr[0], tr[1], tr[2]}));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("calibration file " + path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError("calibration file " + path.string() + ": " + e.what());
    }
    return out;
}

void save_calibration(const std::filesystem::path& path, const CalibrationSet& calib)
{
    nlohmann::json doc;
    doc["units"] = "mm";
    auto& arr = doc["scanners"] = nlohmann::json::array();
    for (const auto& [id, t] : calib) {
        arr.push_back({{"id", id},
                       {"rotation", t.rotation().m},
                       {"translation_mm", {t.translation().x, t.translation().y, t.translation().z}}});
    }
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write calibration file: " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace amfuse::geom
