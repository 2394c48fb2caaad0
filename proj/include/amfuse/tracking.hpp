#pragma once

// Layer-to-layer association of defect regions by bounding-box overlap,
// growth trends and per-layer reports.

#include "amfuse/deviation.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace amfuse::tracking {

using deviation::DefectRegion;
using deviation::DeviationClass;

enum class Trend { undetermined, amplifying, compensating, stable };
std::string_view to_string(Trend t);

enum class TrackStatus { active, closed };

struct TrackEntry {
    int layer = 0;
    double area = 0.0;   // mm^2
    double height = 0.0; // mm
    double peak = 0.0;   // max |d|, mm
    geom::Aabb bbox;
    geom::Point3 centroid{};
};

struct DefectTrack {
    int id = 0;
    DeviationClass cls = DeviationClass::normal;
    std::vector<TrackEntry> entries; // ordered by layer
    TrackStatus status = TrackStatus::active;
    int missed = 0;       // consecutive layers without a match
    int closed_layer = -1;

    const TrackEntry& latest() const { return entries.back(); }
};

struct TrackingParams {
    int k_miss = 2;           // consecutive misses before a track closes
    double s_min = 0.05;      // mm per layer
    int trend_window = 3;     // trailing entries used for the slope
    bool full_3d = false;     // overlap by 3D volume instead of XY footprint

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Least-squares slope of peak |d| against layer over the trailing
/// `window` entries; undetermined with fewer than 3 entries.
Trend trend(const DefectTrack& track, double s_min = 0.05, int window = 3);
double trend_slope(const DefectTrack& track, int window = 3);

/// Owns the tracks of one build. Regions are matched greedily by
/// descending overlap, one to one, only to active tracks of the same
/// class; ties go to the lower track id. Ids are never reused.
class Tracker {
public:
    explicit Tracker(TrackingParams params = {});

    /// Regions of one layer; layers must increase between calls.
    /// Returns the track id assigned to each region.
    std::vector<int> associate(const std::vector<DefectRegion>& regions, int layer);

    const std::vector<DefectTrack>& tracks() const { return tracks_; }
    const TrackingParams& params() const { return params_; }

private:
    TrackingParams params_;
    std::vector<DefectTrack> tracks_;
    int next_id_ = 0;
    int last_layer_ = INT32_MIN;
};

struct GlobalSummary {
    double mean_dev = 0.0; // mean signed deviation over the analysed surface, mm
    double max_dev = 0.0;  // max |d|, mm
};

/// {layer, global: {mean_dev_mm, max_dev_mm}, tracks: [...active tracks
/// with an entry this layer...], history: [...closed tracks...]}.
nlohmann::json layer_report(const std::vector<DefectTrack>& tracks, int layer, const GlobalSummary& global,
                            const TrackingParams& params = {});

/// Cumulative CSV, one row per (track, layer) entry.
std::string csv_header();
std::string csv_rows(const std::vector<DefectTrack>& tracks, int layer, const TrackingParams& params = {});

}  // namespace amfuse::tracking
