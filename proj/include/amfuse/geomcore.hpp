#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace amfuse::geom {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    constexpr bool operator==(const Vec3&) const = default;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
constexpr double squared_norm(const Vec3& v) { return dot(v, v); }
inline Vec3 normalized(const Vec3& v)
{
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec3{};
}
inline bool is_finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }
constexpr Vec3 cwise_min(const Vec3& a, const Vec3& b)
{
    return {a.x < b.x ? a.x : b.x, a.y < b.y ? a.y : b.y, a.z < b.z ? a.z : b.z};
}
constexpr Vec3 cwise_max(const Vec3& a, const Vec3& b)
{
    return {a.x > b.x ? a.x : b.x, a.y > b.y ? a.y : b.y, a.z > b.z ? a.z : b.z};
}

// Positions in a declared frame (mm). Kept as an alias: every position in
// this library is already frame-tagged by the function that produced it.
using Point3 = Vec3;

// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static constexpr Mat3 identity() { return {}; }
    constexpr double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
    constexpr double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }

    Mat3 transposed() const;
    double determinant() const;
    Mat3 operator*(const Mat3& o) const;
    Vec3 operator*(const Vec3& v) const;
    bool operator==(const Mat3&) const = default;
};

/// Largest |(R^T R - I)_ij| over all entries.
double orthonormality_error(const Mat3& r);

/// Nearest rotation in the Frobenius sense (polar factor), via Newton
/// iteration R <- (R + R^-T) / 2. Converges quadratically for inputs close
/// to orthonormal.
Mat3 polar_orthonormalize(const Mat3& r);

/// Rigid-body transform x' = R x + t. Construction validates R.
class RigidTransform {
public:
    RigidTransform() = default;

    /// Throws std::invalid_argument unless R is orthonormal with det +1
    /// (tolerance 1e-9) and every entry is finite.
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform translation(const Vec3& t);
    static RigidTransform rotation_x(double degrees);
    static RigidTransform rotation_y(double degrees);
    static RigidTransform rotation_z(double degrees);

    /// Accepts solver output: entries within 1e-6 of orthonormal are
    /// re-orthogonalised, anything further off is rejected.
    static RigidTransform from_calibration(const Mat3& rotation, const Vec3& translation);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
    Vec3 apply_direction(const Vec3& v) const { return rotation_ * v; }

    /// Row-major 4x4 homogeneous matrix.
    std::array<double, 16> to_matrix() const;

private:
    Mat3 rotation_{};
    Vec3 translation_{};
};

/// Applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& a);

/// Maps scanner-frame points into the work-object frame through the
/// chain pose_OB * calib_BL. Order and length are preserved. Throws
/// std::invalid_argument on any non-finite input point.
std::vector<Point3> project_points(const RigidTransform& pose_OB, const RigidTransform& calib_BL,
                                   std::span<const Point3> local_points);

struct Aabb {
    Point3 min{};
    Point3 max{};

    static Aabb empty();
    bool is_empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
    void expand(const Point3& p);
    Point3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }

    /// Area of the XY overlap of the two boxes; 0 when disjoint or empty.
    double xy_overlap_area(const Aabb& o) const;
    /// Volume of the 3D overlap; 0 when disjoint or empty.
    double overlap_volume(const Aabb& o) const;
    /// Squared distance from p to the box (0 inside).
    double squared_distance(const Point3& p) const;
};

/// Per-scanner hand-eye results keyed by scanner id.
using CalibrationSet = std::map<int, RigidTransform>;

/// JSON: {"scanners": [{"id": 0, "rotation": [9 row-major], "translation_mm": [3]}, ...]}
CalibrationSet load_calibration(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const CalibrationSet& calib);

}  // namespace amfuse::geom
