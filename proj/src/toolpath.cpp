#include "amfuse/toolpath.hpp"

#include "amfuse/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace amfuse::toolpath {

namespace {

constexpr double kConnectTol = 1e-6;
constexpr const char* kHeader = "layer,seg_type,x_mm,y_mm,z_mm,speed_mm_s,tilt_deg";

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t c = s.find(',', pos);
        out.push_back(trim(s.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
        if (c == std::string_view::npos)
            break;
        pos = c + 1;
    }
    return out;
}

double parse_number(std::string_view field, const std::string& where, const char* name)
{
    // strtod accepts forms from_chars handles inconsistently across
    // libstdc++ versions; the field is short so the copy is irrelevant.
    const std::string tmp(field);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v))
        throw ParseError(where + ": invalid " + name + " '" + tmp + "'");
    return v;
}

struct Waypoint {
    int layer;
    SegmentType type;
    Point3 p;
    double speed;
    double tilt;
    bool after_gap;
};

}  // namespace

std::string_view to_string(SegmentType t)
{
    switch (t) {
    case SegmentType::infill: return "infill";
    case SegmentType::edge: return "edge";
    case SegmentType::skip: return "skip";
    case SegmentType::overhang: return "overhang";
    }
    return "infill";
}

std::optional<SegmentType> segment_type_from_string(std::string_view s)
{
    for (SegmentType t : {SegmentType::infill, SegmentType::edge, SegmentType::skip, SegmentType::overhang})
        if (s == to_string(t))
            return t;
    return std::nullopt;
}

Toolpath::Toolpath(std::vector<Segment> segments, double vertex_dwell_s)
    : segments_(std::move(segments)), dwell_(vertex_dwell_s)
{
    if (!(dwell_ >= 0.0) || !std::isfinite(dwell_))
        throw std::invalid_argument("vertex dwell must be finite and non-negative");
    start_times_.reserve(segments_.size() + 1);
    start_times_.push_back(0.0);
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const Segment& s = segments_[i];
        if (!geom::is_finite(s.start) || !geom::is_finite(s.end))
            throw std::invalid_argument("segment " + std::to_string(i) + ": non-finite coordinates");
        if (!(s.speed > 0.0) || !std::isfinite(s.speed))
            throw std::invalid_argument("segment " + std::to_string(i) + ": speed must be positive");
        if (!(s.tilt_deg >= 0.0 && s.tilt_deg < 90.0))
            throw std::invalid_argument("segment " + std::to_string(i) + ": tilt must be in [0, 90)");
        if (s.layer < 0)
            throw std::invalid_argument("segment " + std::to_string(i) + ": negative layer");
        if (i > 0 && !s.after_gap && geom::norm(s.start - segments_[i - 1].end) > kConnectTol)
            throw std::invalid_argument("segment " + std::to_string(i) + ": not connected to its predecessor");
        start_times_.push_back(start_times_.back() + s.length() / s.speed + dwell_);
    }
}

double Toolpath::travel_time(std::size_t i) const
{
    const Segment& s = segments_.at(i);
    return s.length() / s.speed;
}

std::size_t Toolpath::segment_at(double t) const
{
    if (segments_.empty())
        throw std::out_of_range("segment_at: empty toolpath");
    // Last segment whose start time is <= t.
    auto it = std::upper_bound(start_times_.begin(), start_times_.end() - 1, t);
    std::size_t idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - start_times_.begin()) - 1));
    return std::min(idx, segments_.size() - 1);
}

ToolPose Toolpath::pose_at(double t) const
{
    if (segments_.empty())
        throw std::out_of_range("pose_at: empty toolpath");
    if (!(t >= 0.0 && t <= total_duration()))
        throw std::out_of_range("pose_at: t=" + std::to_string(t) + " outside [0, " + std::to_string(total_duration()) +
                                "]");
    const std::size_t i = segment_at(t);
    const Segment& s = segments_[i];
    const double travel = travel_time(i);
    const double local = t - start_times_[i];
    Point3 pos = s.end;
    if (travel > 0.0 && local < travel)
        pos = s.start + (s.end - s.start) * (local / travel);
    return {pos, s.tilt_deg, s.type, i};
}

geom::Aabb Toolpath::bounds() const
{
    geom::Aabb box = geom::Aabb::empty();
    for (const Segment& s : segments_) {
        box.expand(s.start);
        box.expand(s.end);
    }
    return box;
}

Toolpath parse_toolpath(const std::filesystem::path& path, double vertex_dwell_s)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open toolpath file: " + path.string());
    return parse_toolpath(in, path.string(), vertex_dwell_s);
}

Toolpath parse_toolpath(std::istream& in, const std::string& source_name, double vertex_dwell_s)
{
    std::string line;
    int line_no = 0;
    bool have_header = false;
    bool gap_pending = false;
    std::vector<Waypoint> points;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = source_name + ":" + std::to_string(line_no);
        const std::string_view body = trim(line);
        if (!body.empty() && body.front() == '#')
            continue;
        if (!have_header) {
            if (body.empty())
                continue;
            if (body != kHeader)
                throw ParseError(where + ": expected header '" + kHeader + "'");
            have_header = true;
            continue;
        }
        if (body.empty()) {
            gap_pending = !points.empty();
            continue;
        }
        const auto f = split_commas(body);
        if (f.size() != 7)
            throw ParseError(where + ": expected 7 fields, got " + std::to_string(f.size()));

        Waypoint w{};
        const double layer = parse_number(f[0], where, "layer");
        if (layer < 0 || layer != std::floor(layer))
            throw ParseError(where + ": layer must be a non-negative integer");
        w.layer = static_cast<int>(layer);
        const auto type = segment_type_from_string(f[1]);
        if (!type)
            throw ParseError(where + ": unknown seg_type '" + std::string(f[1]) + "'");
        w.type = *type;
        w.p = {parse_number(f[2], where, "x_mm"), parse_number(f[3], where, "y_mm"), parse_number(f[4], where, "z_mm")};
        w.speed = parse_number(f[5], where, "speed_mm_s");
        if (!(w.speed > 0.0))
            throw ParseError(where + ": speed must be positive");
        w.tilt = parse_number(f[6], where, "tilt_deg");
        if (!(w.tilt >= 0.0 && w.tilt < 90.0))
            throw ParseError(where + ": tilt must be in [0, 90)");
        w.after_gap = gap_pending;
        gap_pending = false;
        points.push_back(w);
    }
    if (!have_header)
        throw ParseError(source_name + ": missing header row");

    std::vector<Segment> segs;
    bool pending_gap = false;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const Waypoint& a = points[i - 1];
        const Waypoint& b = points[i];
        if (b.after_gap) {
            pending_gap = true;
            continue;
        }
        if (geom::norm(b.p - a.p) == 0.0)
            continue;
        Segment s;
        s.start = a.p;
        s.end = b.p;
        s.type = b.type;
        s.speed = b.speed;
        s.tilt_deg = b.tilt;
        s.layer = b.layer;
        s.after_gap = pending_gap || segs.empty();
        pending_gap = false;
        segs.push_back(s);
    }
    if (!segs.empty())
        segs.front().after_gap = false;
    return Toolpath(std::move(segs), vertex_dwell_s);
}

void write_toolpath(const std::filesystem::path& path, const Toolpath& tp)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write toolpath file: " + path.string());
    write_toolpath(out, tp);
}

void write_toolpath(std::ostream& out, const Toolpath& tp)
{
    out << kHeader << '\n';
    out << std::setprecision(10);
    auto row = [&out](int layer, SegmentType t, const Point3& p, double speed, double tilt) {
        out << layer << ',' << to_string(t) << ',' << p.x << ',' << p.y << ',' << p.z << ',' << speed << ',' << tilt
            << '\n';
    };
    const auto& segs = tp.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Segment& s = segs[i];
        if (i == 0 || s.after_gap) {
            if (i > 0)
                out << '\n';
            row(s.layer, s.type, s.start, s.speed, s.tilt_deg);
        }
        row(s.layer, s.type, s.end, s.speed, s.tilt_deg);
    }
}

Toolpath make_raster_build(const RasterBuildSpec& spec)
{
    if (!(spec.side > 0.0) || !(spec.spacing > 0.0) || spec.layers < 1 || !(spec.layer_thickness > 0.0))
        throw std::invalid_argument("raster build: side, spacing, layers and thickness must be positive");
    std::vector<Segment> segs;
    Point3 cur = spec.center;
    bool have_cur = false;
    auto move = [&](const Point3& to, SegmentType type, double speed, double tilt, int layer) {
        if (have_cur && geom::norm(to - cur) > 1e-12)
            segs.push_back({cur, to, type, speed, tilt, layer, false});
        cur = to;
        have_cur = true;
    };

    const double h = 0.5 * spec.side;
    const int n_lines = static_cast<int>(std::floor(spec.side / spec.spacing + 1e-9)) + 1;
    for (int k = 0; k < spec.layers; ++k) {
        const int layer = spec.first_layer_index + k;
        const double z = spec.center.z + k * spec.layer_thickness;
        const double a = spec.twist_deg * k * std::numbers::pi / 180.0;
        const geom::Vec3 u{std::cos(a), std::sin(a), 0.0}, v{-std::sin(a), std::cos(a), 0.0};
        const geom::Vec3 along = (k % 2 == 0) ? u : v;
        const geom::Vec3 across = (k % 2 == 0) ? v : u;
        auto at = [&](double s_along, double s_across) {
            Point3 p = spec.center + along * s_along + across * s_across;
            p.z = z;
            return p;
        };

        // Pick the serpentine start corner nearest to the current position.
        double best = std::numeric_limits<double>::infinity();
        double first_across = -h, first_along = -h;
        for (double ac : {-h, h})
            for (double al : {-h, h}) {
                const Point3 c = at(al, ac);
                const double dx = c.x - cur.x, dy = c.y - cur.y;
                const double dist = have_cur ? dx * dx + dy * dy : (ac == -h && al == -h ? 0.0 : 1.0);
                if (dist < best) {
                    best = dist;
                    first_across = ac;
                    first_along = al;
                }
            }

        if (have_cur) {
            move({cur.x, cur.y, z}, SegmentType::skip, spec.skip_speed, 0.0, layer);
            move(at(first_along, first_across), SegmentType::skip, spec.skip_speed, 0.0, layer);
        } else {
            move(at(first_along, first_across), SegmentType::infill, spec.speed, 0.0, layer);
        }
        double dir = first_along < 0 ? 1.0 : -1.0;
        const double step = first_across < 0 ? spec.spacing : -spec.spacing;
        for (int j = 0; j < n_lines; ++j) {
            const double ac = first_across + j * step;
            if (j > 0)
                move(at(-dir * h, ac), SegmentType::infill, spec.speed, 0.0, layer);
            move(at(dir * h, ac), SegmentType::infill, spec.speed, 0.0, layer);
            dir = -dir;
        }

        if (spec.contour) {
            // Nearest corner, then once around the square.
            const geom::Vec3 corners_local[4] = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
            int start = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < 4; ++c) {
                const Point3 p = spec.center + u * corners_local[c].x + v * corners_local[c].y;
                const double d2 = (p.x - cur.x) * (p.x - cur.x) + (p.y - cur.y) * (p.y - cur.y);
                if (d2 < bd) {
                    bd = d2;
                    start = c;
                }
            }
            auto corner = [&](int c) {
                Point3 p = spec.center + u * corners_local[c % 4].x + v * corners_local[c % 4].y;
                p.z = z;
                return p;
            };
            move(corner(start), SegmentType::skip, spec.skip_speed, 0.0, layer);
            for (int c = 1; c <= 4; ++c)
                move(corner(start + c), SegmentType::edge, spec.contour_speed, spec.contour_tilt_deg, layer);
        }
    }
    return Toolpath(std::move(segs));
}

LayerSegmenter::LayerSegmenter(double layer_thickness)
    : thickness_(layer_thickness), half_thickness_(0.5 * layer_thickness)
{
    if (!(layer_thickness > 0.0))
        throw std::invalid_argument("layer thickness must be positive");
}

bool LayerSegmenter::observe(double t, double z)
{
    if (!started_) {
        started_ = true;
        entry_z_ = z;
        layer_start_t_ = t;
        return false;
    }
    if (z > entry_z_ + half_thickness_) {
        ++layer_;
        // snap to whole steps so samples caught mid-way up a layer change
        // do not open a second layer
        entry_z_ += thickness_ * std::round((z - entry_z_) / thickness_);
        layer_start_t_ = t;
        return true;
    }
    return false;
}

std::vector<Layer> segment_layers(const Toolpath& tp, double layer_thickness)
{
    if (tp.empty())
        throw std::invalid_argument("segment_layers: empty toolpath");
    LayerSegmenter seg(layer_thickness);
    std::vector<Layer> layers;
    std::map<long long, double> z_time; // z in micrometres -> time at that z

    auto close_layer = [&](std::size_t end_segment, double t_end) {
        Layer& l = layers.back();
        l.end_segment = end_segment;
        l.t_end = t_end;
        double best_t = -1.0;
        for (const auto& [zq, t] : z_time)
            if (t > best_t) {
                best_t = t;
                l.z_nominal = static_cast<double>(zq) * 1e-3;
            }
        z_time.clear();
    };

    const auto& segs = tp.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const double t0 = tp.segment_start_time(i);
        const bool opens = seg.observe(t0, segs[i].end.z);
        if (i == 0 || opens) {
            if (!layers.empty())
                close_layer(i, t0);
            layers.push_back({seg.current_layer(), 0.0, i, i, t0, t0});
        }
        const long long zq = std::llround(segs[i].end.z * 1e3);
        // Zero-length moves still count once so a layer is never empty.
        z_time[zq] += std::max(tp.segment_end_time(i) - t0, 1e-12);
    }
    close_layer(segs.size(), tp.total_duration());
    return layers;
}

}  // namespace amfuse::toolpath
