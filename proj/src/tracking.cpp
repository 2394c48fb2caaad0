#include "amfuse/tracking.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <tuple>

namespace amfuse::tracking {

using nlohmann::json;

std::string_view to_string(Trend t)
{
    switch (t) {
    case Trend::amplifying: return "amplifying";
    case Trend::compensating: return "compensating";
    case Trend::stable: return "stable";
    case Trend::undetermined: break;
    }
    return "undetermined";
}

void TrackingParams::validate() const
{
    if (k_miss < 1)
        throw std::invalid_argument("k_miss must be at least 1");
    if (!(s_min >= 0.0))
        throw std::invalid_argument("s_min must be non-negative");
    if (trend_window < 3)
        throw std::invalid_argument("trend window needs at least 3 entries");
}

double trend_slope(const DefectTrack& track, int window)
{
    const std::size_t n = std::min(track.entries.size(), static_cast<std::size_t>(std::max(window, 2)));
    if (n < 2)
        return 0.0;
    const auto first = track.entries.end() - static_cast<std::ptrdiff_t>(n);
    double mx = 0.0, my = 0.0;
    for (auto it = first; it != track.entries.end(); ++it) {
        mx += it->layer;
        my += it->peak;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (auto it = first; it != track.entries.end(); ++it) {
        sxy += (it->layer - mx) * (it->peak - my);
        sxx += (it->layer - mx) * (it->layer - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

Trend trend(const DefectTrack& track, double s_min, int window)
{
    if (track.entries.size() < 3)
        return Trend::undetermined;
    const double s = trend_slope(track, window);
    if (s > s_min)
        return Trend::amplifying;
    if (s < -s_min)
        return Trend::compensating;
    return Trend::stable;
}

Tracker::Tracker(TrackingParams params) : params_(params)
{
    params_.validate();
}

std::vector<int> Tracker::associate(const std::vector<DefectRegion>& regions, int layer)
{
    if (layer <= last_layer_)
        throw std::invalid_argument("tracker layers must increase");
    last_layer_ = layer;

    struct Candidate {
        double overlap;
        int track_id;
        std::size_t track;
        std::size_t region;
    };
    std::vector<Candidate> cand;
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
        const DefectTrack& tr = tracks_[t];
        if (tr.status != TrackStatus::active)
            continue;
        for (std::size_t r = 0; r < regions.size(); ++r) {
            if (regions[r].cls != tr.cls)
                continue;
            const double ov = params_.full_3d ? tr.latest().bbox.overlap_volume(regions[r].bbox)
                                              : tr.latest().bbox.xy_overlap_area(regions[r].bbox);
            if (ov > 0.0)
                cand.push_back({ov, tr.id, t, r});
        }
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(b.overlap, a.track_id, a.region) < std::tie(a.overlap, b.track_id, b.region);
    });

    std::vector<int> assigned(regions.size(), -1);
    std::vector<bool> track_used(tracks_.size(), false);
    auto entry_of = [layer](const DefectRegion& r) {
        return TrackEntry{layer, r.area, r.height, r.peak, r.bbox, r.centroid};
    };
    for (const Candidate& c : cand) {
        if (track_used[c.track] || assigned[c.region] >= 0)
            continue;
        track_used[c.track] = true;
        assigned[c.region] = c.track_id;
        tracks_[c.track].entries.push_back(entry_of(regions[c.region]));
        tracks_[c.track].missed = 0;
    }
    const std::size_t existing = tracks_.size();
    for (std::size_t t = 0; t < existing; ++t) {
        DefectTrack& tr = tracks_[t];
        if (tr.status != TrackStatus::active || track_used[t])
            continue;
        if (++tr.missed >= params_.k_miss) {
            tr.status = TrackStatus::closed;
            tr.closed_layer = layer;
        }
    }
    for (std::size_t r = 0; r < regions.size(); ++r) {
        if (assigned[r] >= 0)
            continue;
        DefectTrack tr;
        tr.id = next_id_++;
        tr.cls = regions[r].cls;
        tr.entries.push_back(entry_of(regions[r]));
        assigned[r] = tr.id;
        tracks_.push_back(std::move(tr));
    }
    return assigned;
}

namespace {

json bbox_json(const geom::Aabb& b)
{
    return {{"min", {b.min.x, b.min.y, b.min.z}}, {"max", {b.max.x, b.max.y, b.max.z}}};
}

json track_json(const DefectTrack& t, const TrackingParams& p)
{
    const TrackEntry& e = t.latest();
    return {{"id", t.id},
            {"class", deviation::to_string(t.cls)},
            {"layer", e.layer},
            {"area_mm2", e.area},
            {"height_mm", e.height},
            {"peak_dev_mm", e.peak},
            {"trend", to_string(trend(t, p.s_min, p.trend_window))},
            {"bbox", bbox_json(e.bbox)},
            {"entries", t.entries.size()}};
}

}  // namespace

json layer_report(const std::vector<DefectTrack>& tracks, int layer, const GlobalSummary& global,
                  const TrackingParams& params)
{
    json active = json::array(), history = json::array();
    for (const DefectTrack& t : tracks) {
        if (t.status == TrackStatus::closed) {
            json h = track_json(t, params);
            h["closed_layer"] = t.closed_layer;
            history.push_back(std::move(h));
        } else if (t.latest().layer == layer) {
            active.push_back(track_json(t, params));
        }
    }
    return {{"layer", layer},
            {"global", {{"mean_dev_mm", global.mean_dev}, {"max_dev_mm", global.max_dev}}},
            {"tracks", std::move(active)},
            {"history", std::move(history)}};
}

std::string csv_header()
{
    return "track_id,class,layer,area_mm2,height_mm,peak_dev_mm,trend,bbox_min_x_mm,bbox_min_y_mm,bbox_min_z_mm,"
           "bbox_max_x_mm,bbox_max_y_mm,bbox_max_z_mm\n";
}

std::string csv_rows(const std::vector<DefectTrack>& tracks, int layer, const TrackingParams& params)
{
    std::string out;
    char buf[512];
    for (const DefectTrack& t : tracks) {
        if (t.entries.empty() || t.latest().layer != layer)
            continue;
        const TrackEntry& e = t.latest();
        std::snprintf(buf, sizeof buf, "%d,%s,%d,%.4f,%.4f,%.4f,%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", t.id,
                      std::string(deviation::to_string(t.cls)).c_str(), e.layer, e.area, e.height, e.peak,
                      std::string(to_string(trend(t, params.s_min, params.trend_window))).c_str(), e.bbox.min.x,
                      e.bbox.min.y, e.bbox.min.z, e.bbox.max.x, e.bbox.max.y, e.bbox.max.z);
        out += buf;
    }
    return out;
}

}  // namespace amfuse::tracking
