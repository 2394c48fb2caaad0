#include "amfuse/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace amfuse::deviation {

std::string_view to_string(DeviationClass c)
{
    switch (c) {
    case DeviationClass::normal: return "normal";
    case DeviationClass::overbuild: return "overbuild";
    case DeviationClass::underbuild: return "underbuild";
    case DeviationClass::local_over: return "local_over";
    case DeviationClass::local_under: return "local_under";
    }
    return "normal";
}

std::optional<DeviationClass> class_from_string(std::string_view s)
{
    for (auto c : {DeviationClass::normal, DeviationClass::overbuild, DeviationClass::underbuild,
                   DeviationClass::local_over, DeviationClass::local_under})
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}

void DeviationParams::validate() const
{
    if (!(delta_g > 0.0))
        throw std::invalid_argument("delta_G must be positive");
    if (!(delta_l > 0.0 && delta_l <= 1.0))
        throw std::invalid_argument("delta_L must lie in (0, 1]");
    if (!(a_min >= 0.0))
        throw std::invalid_argument("A_min must be non-negative");
}

ReferenceQuery::ReferenceQuery(fusion::GridView grid, const mesh::TriangleMesh& surface)
    : grid_(std::move(grid)), surface_(std::make_unique<mesh::MeshDistance>(surface))
{
}

double ReferenceQuery::operator()(const Point3& p) const
{
    if (const auto d = grid_.interpolate(p); d && std::abs(*d) < grid_.truncation())
        return *d;
    ++fallbacks_;
    return surface_->signed_distance(p);
}

DeviationMap compute_deviation(const mesh::TriangleMesh& scanned, const ReferenceQuery& ref)
{
    if (scanned.empty())
        throw std::invalid_argument("deviation: scanned mesh is empty");
    DeviationMap map;
    map.mesh = scanned;
    map.mesh.scalar.clear();
    map.mesh.colors.clear();
    const std::size_t n = scanned.vertices.size();
    map.d.resize(n);
    for (std::size_t v = 0; v < n; ++v)
        map.d[v] = ref(scanned.vertices[v]);
    const mesh::Curvature c = mesh::mean_curvature(scanned);
    map.curvature = c.mean;
    map.curvature_valid.resize(n);
    for (std::size_t v = 0; v < n; ++v)
        map.curvature_valid[v] = c.flags[v] == mesh::CurvatureFlag::ok;
    map.metric.assign(n, 0.0);
    map.cls.assign(n, DeviationClass::normal);
    return map;
}

DeviationMap compute_deviation(const mesh::TriangleMesh& scanned, const reference::ReferenceModel& ref)
{
    const mesh::TriangleMesh surface = reference::reference_mesh(ref);
    if (surface.empty())
        throw std::invalid_argument("deviation: reference mesh is empty");
    return compute_deviation(scanned, ReferenceQuery(ref.grid, surface));
}

void classify(DeviationMap& map, double delta_g, double delta_l)
{
    DeviationParams{delta_g, delta_l, 0.0}.validate();
    const std::size_t n = map.d.size();
    map.metric.assign(n, 0.0);
    map.cls.assign(n, DeviationClass::normal);
    double max_hd = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const double d = map.d[v];
        if (d > delta_g)
            map.cls[v] = DeviationClass::overbuild;
        else if (d < -delta_g)
            map.cls[v] = DeviationClass::underbuild;
        else if (map.curvature_valid[v])
            max_hd = std::max(max_hd, std::abs(map.curvature[v] * d));
    }
    if (!(max_hd > 0.0))
        return;
    for (std::size_t v = 0; v < n; ++v) {
        if (map.cls[v] != DeviationClass::normal || !map.curvature_valid[v])
            continue;
        const double m = std::abs(map.curvature[v]) * map.d[v] / max_hd;
        map.metric[v] = m;
        if (std::abs(m) > delta_l)
            map.cls[v] = m > 0.0 ? DeviationClass::local_over : DeviationClass::local_under;
    }
}

std::vector<DefectRegion> segment(const DeviationMap& map, double a_min, int layer)
{
    std::vector<int> labels(map.cls.size());
    for (std::size_t v = 0; v < labels.size(); ++v)
        labels[v] = static_cast<int>(map.cls[v]);
    const auto groups = mesh::connected_components(map.mesh, labels, static_cast<int>(DeviationClass::normal));
    const auto vertex_area = map.mesh.vertex_areas();
    std::vector<DefectRegion> out;
    for (const auto& g : groups) {
        DefectRegion r;
        r.cls = map.cls[g.front()];
        r.layer = layer;
        r.bbox = geom::Aabb::empty();
        Point3 weighted{};
        for (std::uint32_t v : g) {
            const Point3& p = map.mesh.vertices[v];
            r.area += vertex_area[v];
            weighted += p * vertex_area[v];
            r.bbox.expand(p);
            r.peak = std::max(r.peak, std::abs(map.d[v]));
        }
        if (!(r.area > a_min))
            continue;
        r.vertices = g;
        r.centroid = weighted / r.area;
        r.height = r.bbox.max.z - r.bbox.min.z;
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const DefectRegion& a, const DefectRegion& b) {
        return std::tie(a.cls, a.bbox.min.x, a.bbox.min.y, a.bbox.min.z, a.bbox.max.x, a.bbox.max.y, a.area) <
               std::tie(b.cls, b.bbox.min.x, b.bbox.min.y, b.bbox.min.z, b.bbox.max.x, b.bbox.max.y, b.area);
    });
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].id = static_cast<int>(i);
    return out;
}

DeviationSummary summarize(const std::vector<double>& d)
{
    DeviationSummary s;
    s.vertices = d.size();
    if (d.empty())
        return s;
    double sum = 0.0, sum_abs = 0.0, sum2 = 0.0;
    for (double v : d) {
        sum += v;
        sum_abs += std::abs(v);
        sum2 += v * v;
        s.max_abs = std::max(s.max_abs, std::abs(v));
    }
    const auto n = static_cast<double>(d.size());
    s.mean = sum / n;
    s.mean_abs = sum_abs / n;
    s.rms = std::sqrt(sum2 / n);
    return s;
}

namespace {

mesh::Rgb lerp(const mesh::Rgb& a, const mesh::Rgb& b, double t)
{
    t = std::clamp(t, 0.0, 1.0);
    mesh::Rgb out;
    for (std::size_t i = 0; i < 3; ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(a[i] + (b[i] - a[i]) * t));
    return out;
}

}  // namespace

mesh::Rgb class_color(DeviationClass c, double d, double metric, double delta_g)
{
    // ramps saturate at three times the tolerance
    const double t = (std::abs(d) - delta_g) / (2.0 * delta_g);
    switch (c) {
    case DeviationClass::overbuild: return lerp({255, 150, 150}, {170, 0, 0}, t);
    case DeviationClass::underbuild: return lerp({150, 170, 255}, {0, 0, 170}, t);
    case DeviationClass::local_over:
    case DeviationClass::local_under: return lerp({110, 40, 150}, {255, 150, 30}, 0.5 * (metric + 1.0));
    case DeviationClass::normal: break;
    }
    return {200, 200, 200};
}

mesh::TriangleMesh deviation_mesh(const DeviationMap& map, double delta_g)
{
    mesh::TriangleMesh m = map.mesh;
    m.scalar = map.d;
    m.colors.resize(m.vertices.size());
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        m.colors[v] = class_color(map.cls[v], map.d[v], map.metric[v], delta_g);
    return m;
}

mesh::TriangleMesh crop_xy(const mesh::TriangleMesh& m, const geom::Aabb& roi)
{
    auto inside = [&](const Point3& p) {
        return p.x >= roi.min.x && p.x <= roi.max.x && p.y >= roi.min.y && p.y <= roi.max.y;
    };
    mesh::TriangleMesh out;
    std::vector<std::uint32_t> remap(m.vertices.size(), UINT32_MAX);
    for (const auto& t : m.triangles) {
        if (!inside(m.vertices[t[0]]) || !inside(m.vertices[t[1]]) || !inside(m.vertices[t[2]]))
            continue;
        mesh::Triangle nt;
        for (std::size_t k = 0; k < 3; ++k) {
            std::uint32_t& r = remap[t[k]];
            if (r == UINT32_MAX) {
                r = static_cast<std::uint32_t>(out.vertices.size());
                out.vertices.push_back(m.vertices[t[k]]);
                if (!m.scalar.empty())
                    out.scalar.push_back(m.scalar[t[k]]);
                if (!m.colors.empty())
                    out.colors.push_back(m.colors[t[k]]);
            }
            nt[k] = r;
        }
        out.triangles.push_back(nt);
    }
    return out;
}

}  // namespace amfuse::deviation
