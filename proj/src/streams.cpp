#include "amfuse/streams.hpp"

#include "amfuse/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace amfuse::streams {

using nlohmann::json;

std::size_t ProfileFrame::valid_count() const
{
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::string format_frame(const ProfileFrame& f)
{
    std::string s;
    s.reserve(32 + f.points.size() * 22);
    char buf[96];
    std::snprintf(buf, sizeof buf, "{\"t_us\":%lld,\"scanner_id\":%d,\"valid_mask\":[",
                  static_cast<long long>(f.t_us), f.scanner_id);
    s += buf;
    for (std::size_t i = 0; i < f.valid.size(); ++i) {
        if (i)
            s += ',';
        s += f.valid[i] ? '1' : '0';
    }
    s += "],\"points\":[";
    for (std::size_t i = 0; i < f.points.size(); ++i) {
        if (i)
            s += ',';
        if (i < f.valid.size() && f.valid[i])
            std::snprintf(buf, sizeof buf, "[%.4f,%.4f]", f.points[i][0], f.points[i][1]);
        else
            std::snprintf(buf, sizeof buf, "[%.4f,null]", f.points[i][0]);
        s += buf;
    }
    s += "]}";
    return s;
}

std::string format_pose(const PoseSample& p)
{
    const auto& r = p.pose.rotation().m;
    const auto& t = p.pose.translation();
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "{\"t_us\":%lld,\"r\":[%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g],\"t\":[%.6f,%.6f,%.6f]}",
                  static_cast<long long>(p.t_us), r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8], t.x, t.y,
                  t.z);
    return buf;
}

ProfileFrame parse_frame(std::string_view line)
{
    try {
        const json j = json::parse(line);
        ProfileFrame f;
        f.t_us = j.at("t_us").get<std::int64_t>();
        f.scanner_id = j.at("scanner_id").get<int>();
        const auto& mask = j.at("valid_mask");
        const auto& pts = j.at("points");
        if (!mask.is_array() || !pts.is_array() || mask.size() != pts.size())
            throw ParseError("valid_mask and points differ in length");
        f.valid.reserve(mask.size());
        f.points.reserve(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto& p = pts[i];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number())
                throw ParseError("point " + std::to_string(i) + " is not [x, z]");
            bool ok = mask[i].get<int>() != 0 && p[1].is_number();
            const double x = p[0].get<double>();
            const double z = p[1].is_number() ? p[1].get<double>() : 0.0;
            ok = ok && std::isfinite(x) && std::isfinite(z);
            f.valid.push_back(ok ? 1 : 0);
            f.points.push_back({x, z});
        }
        return f;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad scan record: ") + e.what());
    }
}

PoseSample parse_pose(std::string_view line)
{
    try {
        const json j = json::parse(line);
        const auto r = j.at("r").get<std::vector<double>>();
        const auto t = j.at("t").get<std::vector<double>>();
        if (r.size() != 9 || t.size() != 3)
            throw ParseError("pose record needs 9 rotation and 3 translation values");
        geom::Mat3 m;
        std::copy(r.begin(), r.end(), m.m.begin());
        PoseSample p;
        p.t_us = j.at("t_us").get<std::int64_t>();
        p.pose = geom::RigidTransform::from_calibration(m, {t[0], t[1], t[2]});
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad pose record: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("bad pose record: ") + e.what());
    }
}

FrameReader::FrameReader(const std::filesystem::path& path) : path_(path), in_(path)
{
    if (!in_)
        throw IoError("cannot open scan stream: " + path.string());
}

std::optional<ProfileFrame> FrameReader::next()
{
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (line.empty())
            continue;
        ProfileFrame f;
        try {
            f = parse_frame(line);
        } catch (const ParseError&) {
            ++skipped_;
            continue;
        }
        if (f.t_us < last_t_)
            throw StreamError(path_.string() + ":" + std::to_string(line_no_) + ": timestamp goes backwards");
        last_t_ = f.t_us;
        return f;
    }
    return std::nullopt;
}

PoseTrack::PoseTrack(std::vector<PoseSample> samples) : samples_(std::move(samples))
{
    for (std::size_t i = 1; i < samples_.size(); ++i)
        if (samples_[i].t_us <= samples_[i - 1].t_us)
            throw StreamError("pose stream timestamps are not strictly increasing at sample " + std::to_string(i));
}

PoseTrack PoseTrack::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open pose stream: " + path.string());
    std::vector<PoseSample> samples;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty())
            continue;
        try {
            samples.push_back(parse_pose(line));
        } catch (const ParseError& e) {
            throw StreamError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    if (samples.empty())
        throw StreamError("pose stream is empty: " + path.string());
    try {
        return PoseTrack(std::move(samples));
    } catch (const StreamError& e) {
        throw StreamError(path.string() + ": " + e.what());
    }
}

std::optional<geom::RigidTransform> PoseTrack::at(std::int64_t t_us) const
{
    if (samples_.empty() || t_us < samples_.front().t_us || t_us > samples_.back().t_us)
        return std::nullopt;
    auto hi = std::lower_bound(samples_.begin(), samples_.end(), t_us,
                               [](const PoseSample& s, std::int64_t t) { return s.t_us < t; });
    if (hi->t_us == t_us)
        return hi->pose;
    auto lo = hi - 1;
    const double f = static_cast<double>(t_us - lo->t_us) / static_cast<double>(hi->t_us - lo->t_us);
    const geom::Vec3 t = lo->pose.translation() * (1.0 - f) + hi->pose.translation() * f;
    const geom::Mat3& r = f < 0.5 ? lo->pose.rotation() : hi->pose.rotation();
    return geom::RigidTransform(r, t);
}

std::int64_t PoseTrack::max_gap() const
{
    std::int64_t g = 0;
    for (std::size_t i = 1; i < samples_.size(); ++i)
        g = std::max(g, samples_[i].t_us - samples_[i - 1].t_us);
    return g;
}

}  // namespace amfuse::streams
