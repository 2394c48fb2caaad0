#pragma once

// Triangle meshes extracted from distance fields and the queries the
// deviation analysis needs on them.

#include "amfuse/fusion.hpp"
#include "amfuse/geomcore.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace amfuse::mesh {

using geom::Point3;
using geom::Vec3;

using Triangle = std::array<std::uint32_t, 3>;
using Rgb = std::array<std::uint8_t, 3>;

/// Counter-clockwise triangles seen from outside; normals point to the
/// positive side of the field (away from material).
struct TriangleMesh {
    std::vector<Point3> vertices;
    std::vector<Triangle> triangles;
    std::vector<double> scalar; // optional, one per vertex (mm)
    std::vector<Rgb> colors;    // optional, one per vertex

    bool empty() const { return triangles.empty(); }
    /// Throws std::invalid_argument on out-of-range indices or channel sizes.
    void validate() const;

    Vec3 face_normal(std::size_t t) const; // unit, zero for degenerate faces
    double face_area(std::size_t t) const;
    double area() const;
    geom::Aabb bounds() const;
    /// One third of the area of every incident triangle.
    std::vector<double> vertex_areas() const;
    /// Angle-weighted, unit length.
    std::vector<Vec3> vertex_normals() const;
};

/// Number of triangles incident to every undirected edge.
struct EdgeIncidence {
    std::size_t boundary = 0;     // edges with one triangle
    std::size_t manifold = 0;     // edges with two
    std::size_t non_manifold = 0; // edges with more
    std::size_t inconsistent = 0; // interior edges traversed twice in the same direction
};
EdgeIncidence edge_incidence(const TriangleMesh& m);

/// Vertex flags: true when the vertex touches a boundary edge.
std::vector<bool> boundary_vertices(const TriangleMesh& m);

/// Marching cubes over the cubes formed by voxel centres. A cube emits
/// triangles only when all 8 corners are observed. Vertices on shared edges
/// are shared, so closed iso-surfaces give watertight meshes.
TriangleMesh marching_cubes(const fusion::GridView& grid, double iso = 0.0);

/// Exact signed distance to a triangle mesh through a bounding volume
/// hierarchy. Sign from the angle-weighted pseudonormal of the closest
/// feature; negative inside (behind the surface).
class MeshDistance {
public:
    /// Throws std::invalid_argument on an empty mesh.
    explicit MeshDistance(const TriangleMesh& mesh);
    ~MeshDistance();
    MeshDistance(MeshDistance&&) noexcept;
    MeshDistance& operator=(MeshDistance&&) noexcept;

    struct Result {
        double distance = 0.0; // signed
        Point3 closest{};
        std::uint32_t triangle = 0;
    };
    Result query(const Point3& p) const;
    double signed_distance(const Point3& p) const { return query(p).distance; }

    /// Same answer by scanning every triangle; test oracle.
    Result query_brute_force(const Point3& p) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

double signed_distance_to_mesh(const Point3& query, const TriangleMesh& mesh);

enum class CurvatureFlag : std::uint8_t { ok, boundary, non_manifold, degenerate };

struct Curvature {
    std::vector<double> mean;         // 1/mm, convex positive
    std::vector<CurvatureFlag> flags; // value is 0 wherever flag != ok
};

/// Discrete mean curvature from the cotangent Laplacian and mixed Voronoi
/// areas.
Curvature mean_curvature(const TriangleMesh& m);

/// Maximal edge-connected groups of vertices sharing a label. Vertices whose
/// label equals `skip` are not grouped. Groups are sorted internally and
/// ordered by their smallest vertex index.
std::vector<std::vector<std::uint32_t>> connected_components(const TriangleMesh& m, const std::vector<int>& labels,
                                                             std::optional<int> skip = std::nullopt);

/// ASCII PLY. `scalar_deviation` and red/green/blue are written when the
/// corresponding channel is populated.
void write_ply(const std::filesystem::path& path, const TriangleMesh& m);
void write_ply(std::ostream& out, const TriangleMesh& m);
/// Reads ASCII PLY with x/y/z, optional scalar_deviation and colors; other
/// properties are ignored. Throws IoError or ParseError.
TriangleMesh read_ply(const std::filesystem::path& path);
TriangleMesh read_ply(std::istream& in, const std::string& source_name);

}  // namespace amfuse::mesh
