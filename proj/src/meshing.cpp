#include "amfuse/meshing.hpp"

#include "mc_tables.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace amfuse::mesh {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

double corner_angle(const Point3& at, const Point3& p, const Point3& q)
{
    const Vec3 u = p - at, v = q - at;
    return std::atan2(geom::norm(geom::cross(u, v)), geom::dot(u, v));
}

}  // namespace

void TriangleMesh::validate() const
{
    const std::size_t n = vertices.size();
    for (const Triangle& t : triangles)
        for (std::uint32_t i : t)
            if (i >= n)
                throw std::invalid_argument("mesh: triangle index out of range");
    if (!scalar.empty() && scalar.size() != n)
        throw std::invalid_argument("mesh: scalar channel size mismatch");
    if (!colors.empty() && colors.size() != n)
        throw std::invalid_argument("mesh: color channel size mismatch");
}

Vec3 TriangleMesh::face_normal(std::size_t t) const
{
    const Triangle& f = triangles[t];
    const Vec3 c = geom::cross(vertices[f[1]] - vertices[f[0]], vertices[f[2]] - vertices[f[0]]);
    const double len = geom::norm(c);
    return len > 0.0 ? c / len : Vec3{};
}

double TriangleMesh::face_area(std::size_t t) const
{
    const Triangle& f = triangles[t];
    return 0.5 * geom::norm(geom::cross(vertices[f[1]] - vertices[f[0]], vertices[f[2]] - vertices[f[0]]));
}

double TriangleMesh::area() const
{
    double a = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t)
        a += face_area(t);
    return a;
}

geom::Aabb TriangleMesh::bounds() const
{
    geom::Aabb b = geom::Aabb::empty();
    for (const Point3& p : vertices)
        b.expand(p);
    return b;
}

std::vector<double> TriangleMesh::vertex_areas() const
{
    std::vector<double> a(vertices.size(), 0.0);
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const double third = face_area(t) / 3.0;
        for (std::uint32_t i : triangles[t])
            a[i] += third;
    }
    return a;
}

std::vector<Vec3> TriangleMesh::vertex_normals() const
{
    std::vector<Vec3> n(vertices.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const Vec3 fn = face_normal(t);
        const Triangle& f = triangles[t];
        for (int k = 0; k < 3; ++k) {
            const double ang = corner_angle(vertices[f[k]], vertices[f[(k + 1) % 3]], vertices[f[(k + 2) % 3]]);
            n[f[k]] += fn * ang;
        }
    }
    for (Vec3& v : n)
        v = geom::normalized(v);
    return n;
}

EdgeIncidence edge_incidence(const TriangleMesh& m)
{
    // count, and signed direction balance (+1 for a<b traversal, -1 otherwise)
    std::unordered_map<std::uint64_t, std::pair<int, int>> edges;
    edges.reserve(m.triangles.size() * 2);
    for (const Triangle& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t a = t[k], b = t[(k + 1) % 3];
            auto& e = edges[edge_key(a, b)];
            ++e.first;
            e.second += a < b ? 1 : -1;
        }
    EdgeIncidence out;
    for (const auto& [key, e] : edges) {
        if (e.first == 1)
            ++out.boundary;
        else if (e.first == 2) {
            ++out.manifold;
            if (e.second != 0)
                ++out.inconsistent;
        } else
            ++out.non_manifold;
    }
    return out;
}

std::vector<bool> boundary_vertices(const TriangleMesh& m)
{
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(m.triangles.size() * 2);
    for (const Triangle& t : m.triangles)
        for (int k = 0; k < 3; ++k)
            ++count[edge_key(t[k], t[(k + 1) % 3])];
    std::vector<bool> flags(m.vertices.size(), false);
    for (const auto& [key, c] : count)
        if (c == 1) {
            flags[key >> 32] = true;
            flags[key & 0xffffffffu] = true;
        }
    return flags;
}

// ---------------------------------------------------------------------------
// Marching cubes

namespace {

struct EdgeId {
    fusion::VoxelKey v; // lower corner
    int axis;
    bool operator==(const EdgeId&) const = default;
};

struct EdgeIdHash {
    std::size_t operator()(const EdgeId& e) const noexcept
    {
        return fusion::VoxelKeyHash{}(e.v) * 3u + static_cast<std::size_t>(e.axis);
    }
};

}  // namespace

TriangleMesh marching_cubes(const fusion::GridView& grid, double iso)
{
    using detail::kCornerOffset;
    using detail::kEdgeCorners;
    using detail::kTriTable;
    using fusion::VoxelKey;

    TriangleMesh mesh;
    std::unordered_map<EdgeId, std::uint32_t, EdgeIdHash> edge_vertex;
    const double vs = grid.voxel_size();
    // Values exactly on the iso level are pushed to the outside so no vertex
    // coincides with a corner shared by several cubes.
    const double nudge = 1e-9 * vs;

    auto lookup = [&](const VoxelKey& k, const fusion::LeafBlock* home, const VoxelKey& home_key,
                      double& out) -> bool {
        const fusion::LeafBlock* b = home;
        if (!(fusion::block_of(k) == home_key))
            b = grid.find_block(fusion::block_of(k));
        if (!b)
            return false;
        const auto li = static_cast<std::size_t>(fusion::local_index(k));
        if (!(b->W[li] > 0.0))
            return false;
        out = b->D[li] == iso ? iso + nudge : b->D[li];
        return true;
    };

    for (const auto& entry : grid.blocks()) {
        const VoxelKey bk = entry.key;
        const fusion::LeafBlock* home = entry.block.get();
        for (int lz = 0; lz < fusion::kBlockDim; ++lz)
            for (int ly = 0; ly < fusion::kBlockDim; ++ly)
                for (int lx = 0; lx < fusion::kBlockDim; ++lx) {
                    const VoxelKey base{bk.x * fusion::kBlockDim + lx, bk.y * fusion::kBlockDim + ly,
                                        bk.z * fusion::kBlockDim + lz};
                    double val[8];
                    bool complete = true;
                    int cube = 0;
                    for (int c = 0; c < 8 && complete; ++c) {
                        const VoxelKey k{base.x + kCornerOffset[c][0], base.y + kCornerOffset[c][1],
                                         base.z + kCornerOffset[c][2]};
                        complete = lookup(k, home, bk, val[c]);
                        if (complete && val[c] < iso)
                            cube |= 1 << c;
                    }
                    if (!complete || cube == 0 || cube == 255)
                        continue;

                    std::uint32_t ev[12];
                    for (int e = 0; e < 12; ++e)
                        ev[e] = UINT32_MAX;
                    auto vertex_on = [&](int e) {
                        if (ev[e] != UINT32_MAX)
                            return ev[e];
                        int a = kEdgeCorners[e][0], b = kEdgeCorners[e][1];
                        int axis = 0;
                        while (kCornerOffset[a][axis] == kCornerOffset[b][axis])
                            ++axis;
                        if (kCornerOffset[a][axis] > kCornerOffset[b][axis])
                            std::swap(a, b);
                        const VoxelKey lo{base.x + kCornerOffset[a][0], base.y + kCornerOffset[a][1],
                                          base.z + kCornerOffset[a][2]};
                        auto [it, inserted] = edge_vertex.try_emplace(EdgeId{lo, axis}, 0u);
                        if (inserted) {
                            const double t = (iso - val[a]) / (val[b] - val[a]);
                            Point3 p = grid.voxel_center(lo);
                            p[axis] += t * vs;
                            it->second = static_cast<std::uint32_t>(mesh.vertices.size());
                            mesh.vertices.push_back(p);
                        }
                        return ev[e] = it->second;
                    };
                    for (int i = 0; kTriTable[cube][i] != -1; i += 3) {
                        const Triangle t{vertex_on(kTriTable[cube][i]), vertex_on(kTriTable[cube][i + 1]),
                                         vertex_on(kTriTable[cube][i + 2])};
                        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
                            continue;
                        mesh.triangles.push_back(t);
                    }
                }
    }

    // Drop zero-area triangles and compact unused vertices.
    std::vector<Triangle> kept;
    kept.reserve(mesh.triangles.size());
    const double min_area2 = 1e-24 * vs * vs * vs * vs;
    for (const Triangle& t : mesh.triangles) {
        const Vec3 c = geom::cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        if (geom::squared_norm(c) > min_area2)
            kept.push_back(t);
    }
    std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    std::vector<Point3> verts;
    verts.reserve(mesh.vertices.size());
    for (Triangle& t : kept)
        for (std::uint32_t& i : t) {
            if (remap[i] == UINT32_MAX) {
                remap[i] = static_cast<std::uint32_t>(verts.size());
                verts.push_back(mesh.vertices[i]);
            }
            i = remap[i];
        }
    mesh.vertices = std::move(verts);
    mesh.triangles = std::move(kept);
    return mesh;
}

// ---------------------------------------------------------------------------
// Curvature

Curvature mean_curvature(const TriangleMesh& m)
{
    const std::size_t n = m.vertices.size();
    Curvature out;
    out.mean.assign(n, 0.0);
    out.flags.assign(n, CurvatureFlag::ok);

    std::unordered_map<std::uint64_t, int> edge_count;
    edge_count.reserve(m.triangles.size() * 2);
    for (const Triangle& t : m.triangles)
        for (int k = 0; k < 3; ++k)
            ++edge_count[edge_key(t[k], t[(k + 1) % 3])];

    std::vector<std::vector<std::uint32_t>> incident(n);
    for (std::uint32_t t = 0; t < m.triangles.size(); ++t)
        for (std::uint32_t i : m.triangles[t])
            incident[i].push_back(t);

    for (const auto& [key, c] : edge_count) {
        const auto a = static_cast<std::uint32_t>(key >> 32), b = static_cast<std::uint32_t>(key & 0xffffffffu);
        const CurvatureFlag f = c == 1 ? CurvatureFlag::boundary : (c > 2 ? CurvatureFlag::non_manifold : CurvatureFlag::ok);
        for (std::uint32_t v : {a, b})
            if (f != CurvatureFlag::ok && out.flags[v] != CurvatureFlag::non_manifold)
                out.flags[v] = f;
    }

    // Single fan check: walk the one-ring across shared edges.
    for (std::uint32_t v = 0; v < n; ++v) {
        if (out.flags[v] != CurvatureFlag::ok)
            continue;
        const auto& tris = incident[v];
        if (tris.empty()) {
            out.flags[v] = CurvatureFlag::degenerate;
            continue;
        }
        std::vector<bool> seen(tris.size(), false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t visited = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < tris.size(); ++j) {
                if (seen[j])
                    continue;
                // adjacent if the two triangles share an edge through v
                int shared = 0;
                for (std::uint32_t a : m.triangles[tris[cur]])
                    for (std::uint32_t b : m.triangles[tris[j]])
                        shared += (a == b) ? 1 : 0;
                if (shared >= 2) {
                    seen[j] = true;
                    ++visited;
                    stack.push_back(j);
                }
            }
        }
        if (visited != tris.size())
            out.flags[v] = CurvatureFlag::non_manifold;
    }

    std::vector<Vec3> lap(n);
    std::vector<double> area(n, 0.0);
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const Triangle& f = m.triangles[t];
        const Point3 p[3] = {m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]};
        const double tri_area = m.face_area(t);
        if (!(tri_area > 0.0))
            continue;
        double cot[3];
        bool obtuse_at[3];
        for (int k = 0; k < 3; ++k) {
            const Vec3 u = p[(k + 1) % 3] - p[k], v = p[(k + 2) % 3] - p[k];
            cot[k] = geom::dot(u, v) / geom::norm(geom::cross(u, v));
            obtuse_at[k] = geom::dot(u, v) < 0.0;
        }
        const bool obtuse = obtuse_at[0] || obtuse_at[1] || obtuse_at[2];
        for (int k = 0; k < 3; ++k) {
            const int i = k, j = (k + 1) % 3, o = (k + 2) % 3;
            // edge (i, j) is opposite corner o
            const Vec3 e = p[i] - p[j];
            lap[f[i]] += e * cot[o];
            lap[f[j]] -= e * cot[o];
            if (!obtuse) {
                // Voronoi share of vertex i: edges i-j (opposite o) and i-o (opposite j)
                const Vec3 eij = p[j] - p[i], eio = p[o] - p[i];
                area[f[i]] += (geom::squared_norm(eij) * cot[o] + geom::squared_norm(eio) * cot[j]) / 8.0;
            } else {
                area[f[i]] += obtuse_at[i] ? tri_area / 2.0 : tri_area / 4.0;
            }
        }
    }

    const std::vector<Vec3> normals = m.vertex_normals();
    for (std::size_t v = 0; v < n; ++v) {
        if (out.flags[v] != CurvatureFlag::ok)
            continue;
        if (!(area[v] > 0.0)) {
            out.flags[v] = CurvatureFlag::degenerate;
            continue;
        }
        // lap = sum cot * (x_i - x_j) = 2 A K with K = 2 H n
        const Vec3 k = lap[v] / (2.0 * area[v]);
        const double h = 0.5 * geom::norm(k);
        out.mean[v] = geom::dot(k, normals[v]) >= 0.0 ? h : -h;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Components

std::vector<std::vector<std::uint32_t>> connected_components(const TriangleMesh& m, const std::vector<int>& labels,
                                                             std::optional<int> skip)
{
    const std::size_t n = m.vertices.size();
    if (labels.size() != n)
        throw std::invalid_argument("connected_components: one label per vertex required");
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const Triangle& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t a = t[k], b = t[(k + 1) % 3];
            if (labels[a] != labels[b] || (skip && labels[a] == *skip))
                continue;
            std::uint32_t ra = find(a), rb = find(b);
            if (ra != rb) {
                if (ra > rb)
                    std::swap(ra, rb);
                parent[rb] = ra;
            }
        }
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<std::vector<std::uint32_t>> groups;
    for (std::uint32_t v = 0; v < n; ++v) {
        if (skip && labels[v] == *skip)
            continue;
        const std::uint32_t r = find(v);
        auto [it, inserted] = slot.try_emplace(r, groups.size());
        if (inserted)
            groups.emplace_back();
        groups[it->second].push_back(v);
    }
    return groups;
}

}  // namespace amfuse::mesh
