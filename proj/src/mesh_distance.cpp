#include "amfuse/meshing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace amfuse::mesh {

namespace {

enum class Feature : std::uint8_t { face, vertex0, vertex1, vertex2, edge01, edge12, edge20 };

struct Closest {
    Point3 point;
    Feature feature;
};

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Closest closest_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c)
{
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = geom::dot(ab, ap), d2 = geom::dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0)
        return {a, Feature::vertex0};
    const Vec3 bp = p - b;
    const double d3 = geom::dot(ab, bp), d4 = geom::dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3)
        return {b, Feature::vertex1};
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {a + ab * v, Feature::edge01};
    }
    const Vec3 cp = p - c;
    const double d5 = geom::dot(ab, cp), d6 = geom::dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6)
        return {c, Feature::vertex2};
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {a + ac * w, Feature::edge20};
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {b + (c - b) * w, Feature::edge12};
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return {a + ab * v + ac * w, Feature::face};
}

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct Node {
    geom::Aabb box;
    std::uint32_t left = 0;  // child index, or first primitive for leaves
    std::uint32_t count = 0; // > 0 for leaves
    std::uint32_t right = 0;
};

constexpr std::uint32_t kLeafSize = 4;

}  // namespace

struct MeshDistance::Impl {
    std::vector<Point3> vertices;
    std::vector<Triangle> triangles;
    std::vector<Vec3> face_normal;
    std::vector<Vec3> vertex_pseudo;
    std::vector<std::array<Vec3, 3>> edge_pseudo; // edges 01, 12, 20 per triangle
    std::vector<std::uint32_t> order;             // primitive order for the leaves
    std::vector<Node> nodes;

    geom::Aabb tri_box(std::uint32_t t) const
    {
        geom::Aabb b = geom::Aabb::empty();
        for (std::uint32_t i : triangles[t])
            b.expand(vertices[i]);
        return b;
    }

    std::uint32_t build(std::uint32_t begin, std::uint32_t end, const std::vector<Point3>& centroid)
    {
        Node node;
        node.box = geom::Aabb::empty();
        geom::Aabb cbox = geom::Aabb::empty();
        for (std::uint32_t i = begin; i < end; ++i) {
            const geom::Aabb tb = tri_box(order[i]);
            node.box.expand(tb.min);
            node.box.expand(tb.max);
            cbox.expand(centroid[order[i]]);
        }
        const auto idx = static_cast<std::uint32_t>(nodes.size());
        nodes.push_back(node);
        if (end - begin <= kLeafSize) {
            nodes[idx].left = begin;
            nodes[idx].count = end - begin;
            return idx;
        }
        const Vec3 ext = cbox.extent();
        const int axis = (ext.x >= ext.y && ext.x >= ext.z) ? 0 : (ext.y >= ext.z ? 1 : 2);
        const std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double ca = centroid[a][axis], cb = centroid[b][axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        const std::uint32_t l = build(begin, mid, centroid);
        const std::uint32_t r = build(mid, end, centroid);
        nodes[idx].left = l;
        nodes[idx].right = r;
        return idx;
    }

    void visit(const Point3& p, std::uint32_t t, double& best_d2, std::uint32_t& best_t, Closest& best) const
    {
        const Triangle& f = triangles[t];
        const Closest c = closest_on_triangle(p, vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        const double d2 = geom::squared_norm(p - c.point);
        if (d2 < best_d2 || (d2 == best_d2 && t < best_t)) {
            best_d2 = d2;
            best_t = t;
            best = c;
        }
    }

    Result finish(const Point3& p, double best_d2, std::uint32_t best_t, const Closest& best) const
    {
        Result r;
        r.closest = best.point;
        r.triangle = best_t;
        if (best_d2 == 0.0)
            return r;
        Vec3 n;
        const Triangle& f = triangles[best_t];
        switch (best.feature) {
        case Feature::face: n = face_normal[best_t]; break;
        case Feature::vertex0: n = vertex_pseudo[f[0]]; break;
        case Feature::vertex1: n = vertex_pseudo[f[1]]; break;
        case Feature::vertex2: n = vertex_pseudo[f[2]]; break;
        case Feature::edge01: n = edge_pseudo[best_t][0]; break;
        case Feature::edge12: n = edge_pseudo[best_t][1]; break;
        case Feature::edge20: n = edge_pseudo[best_t][2]; break;
        }
        const double dist = std::sqrt(best_d2);
        r.distance = geom::dot(p - best.point, n) < 0.0 ? -dist : dist;
        return r;
    }
};

MeshDistance::MeshDistance(const TriangleMesh& mesh) : impl_(std::make_unique<Impl>())
{
    if (mesh.triangles.empty())
        throw std::invalid_argument("signed distance: empty mesh");
    mesh.validate();
    Impl& m = *impl_;
    m.vertices = mesh.vertices;
    m.triangles = mesh.triangles;
    const std::size_t nt = m.triangles.size();
    m.face_normal.resize(nt);
    m.vertex_pseudo.assign(m.vertices.size(), Vec3{});
    std::unordered_map<std::uint64_t, Vec3> edge_sum;
    edge_sum.reserve(nt * 2);
    std::vector<Point3> centroid(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        m.face_normal[t] = mesh.face_normal(t);
        const Triangle& f = m.triangles[t];
        centroid[t] = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
        for (int k = 0; k < 3; ++k) {
            const Point3& at = m.vertices[f[k]];
            const Vec3 u = m.vertices[f[(k + 1) % 3]] - at, v = m.vertices[f[(k + 2) % 3]] - at;
            const double ang = std::atan2(geom::norm(geom::cross(u, v)), geom::dot(u, v));
            m.vertex_pseudo[f[k]] += m.face_normal[t] * ang;
            edge_sum[edge_key(f[k], f[(k + 1) % 3])] += m.face_normal[t];
        }
    }
    m.edge_pseudo.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const Triangle& f = m.triangles[t];
        for (int k = 0; k < 3; ++k)
            m.edge_pseudo[t][static_cast<std::size_t>(k)] = edge_sum.at(edge_key(f[k], f[(k + 1) % 3]));
    }
    m.order.resize(nt);
    std::iota(m.order.begin(), m.order.end(), 0u);
    m.nodes.reserve(2 * nt / kLeafSize + 2);
    m.build(0, static_cast<std::uint32_t>(nt), centroid);
}

MeshDistance::~MeshDistance() = default;
MeshDistance::MeshDistance(MeshDistance&&) noexcept = default;
MeshDistance& MeshDistance::operator=(MeshDistance&&) noexcept = default;

MeshDistance::Result MeshDistance::query(const Point3& p) const
{
    const Impl& m = *impl_;
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best_t = std::numeric_limits<std::uint32_t>::max();
    Closest best{};
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = m.nodes[stack[--top]];
        if (node.box.squared_distance(p) > best_d2)
            continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.left; i < node.left + node.count; ++i)
                m.visit(p, m.order[i], best_d2, best_t, best);
            continue;
        }
        const double dl = m.nodes[node.left].box.squared_distance(p);
        const double dr = m.nodes[node.right].box.squared_distance(p);
        // push the farther child first so the nearer one is explored first
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return m.finish(p, best_d2, best_t, best);
}

MeshDistance::Result MeshDistance::query_brute_force(const Point3& p) const
{
    const Impl& m = *impl_;
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best_t = std::numeric_limits<std::uint32_t>::max();
    Closest best{};
    for (std::uint32_t t = 0; t < m.triangles.size(); ++t)
        m.visit(p, t, best_d2, best_t, best);
    return m.finish(p, best_d2, best_t, best);
}

double signed_distance_to_mesh(const Point3& query, const TriangleMesh& mesh)
{
    return MeshDistance(mesh).signed_distance(query);
}

}  // namespace amfuse::mesh
