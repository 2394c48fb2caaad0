#pragma once

#include "amfuse/geomcore.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace amfuse::toolpath {

using geom::Point3;

enum class SegmentType { infill, edge, skip, overhang };

std::string_view to_string(SegmentType t);
std::optional<SegmentType> segment_type_from_string(std::string_view s);

struct Segment {
    Point3 start;
    Point3 end;
    SegmentType type = SegmentType::infill;
    double speed = 30.0;   // mm/s, > 0
    double tilt_deg = 0.0; // spray angle from the surface normal, [0, 90)
    int layer = 0;         // layer column of the source file
    bool after_gap = false; // an intentional discontinuity precedes this segment

    double length() const { return geom::norm(end - start); }
};

struct ToolPose {
    Point3 position;
    double tilt_deg = 0.0;
    SegmentType type = SegmentType::infill;
    std::size_t segment = 0;
};

/// Executed deposition path, timed at constant speed per segment.
class Toolpath {
public:
    Toolpath() = default;

    /// Validates every segment (speed > 0, 0 <= tilt < 90, finite
    /// coordinates, connectivity unless after_gap). `vertex_dwell_s` adds a
    /// stationary pause at the end of every segment; 0 keeps pure polyline
    /// traversal.
    explicit Toolpath(std::vector<Segment> segments, double vertex_dwell_s = 0.0);

    const std::vector<Segment>& segments() const { return segments_; }
    std::size_t size() const { return segments_.size(); }
    bool empty() const { return segments_.empty(); }

    double total_duration() const { return start_times_.empty() ? 0.0 : start_times_.back(); }
    double segment_start_time(std::size_t i) const { return start_times_.at(i); }
    double segment_end_time(std::size_t i) const { return start_times_.at(i + 1); }
    /// Time spent moving along segment i (excludes dwell).
    double travel_time(std::size_t i) const;
    double vertex_dwell() const { return dwell_; }

    /// Linear interpolation along the active segment. Throws
    /// std::out_of_range for t outside [0, total_duration()].
    ToolPose pose_at(double t) const;

    /// Index of the segment active at time t (clamped to the path).
    std::size_t segment_at(double t) const;

    geom::Aabb bounds() const;

private:
    std::vector<Segment> segments_;
    std::vector<double> start_times_; // size()+1 entries, cumulative
    double dwell_ = 0.0;
};

/// Reads the neutral CSV format: header `layer,seg_type,x_mm,y_mm,z_mm,
/// speed_mm_s,tilt_deg`, one waypoint per row; each row after the first
/// defines the segment arriving at it (type, speed and tilt are taken from
/// the destination row). A blank line marks an intentional discontinuity.
/// Lines starting with '#' are comments. Throws IoError / ParseError, the
/// latter naming the offending line.
Toolpath parse_toolpath(const std::filesystem::path& path, double vertex_dwell_s = 0.0);
Toolpath parse_toolpath(std::istream& in, const std::string& source_name, double vertex_dwell_s = 0.0);

void write_toolpath(const std::filesystem::path& path, const Toolpath& tp);
void write_toolpath(std::ostream& out, const Toolpath& tp);

/// Parameters of a synthetic layered raster build: a square footprint,
/// serpentine infill alternating between the square's two axes each layer,
/// optionally rotated by `twist_deg` per layer and closed by a tilted edge
/// contour. Consecutive layers are joined by a vertical lift followed by a
/// skip move to the nearest corner of the next raster.
struct RasterBuildSpec {
    Point3 center{15.0, 15.0, 0.0}; // z is the first layer's tool height
    double side = 30.0;
    double spacing = 2.0;
    int layers = 3;
    double layer_thickness = 0.8;
    double speed = 30.0;
    double twist_deg = 0.0;
    bool contour = false;
    double contour_tilt_deg = 35.0;
    double contour_speed = 30.0;
    double skip_speed = 50.0;
    int first_layer_index = 0;
};

Toolpath make_raster_build(const RasterBuildSpec& spec);

struct Layer {
    int index = 0;
    double z_nominal = 0.0;       // modal segment z (duration-weighted)
    std::size_t first_segment = 0;
    std::size_t end_segment = 0;  // one past the last segment
    double t_start = 0.0;
    double t_end = 0.0;
};

/// Streaming layer detection from tool height. A new layer starts at the
/// first sample whose z exceeds the current layer's entry height by more
/// than half the layer thickness. Downward moves never open a layer.
class LayerSegmenter {
public:
    explicit LayerSegmenter(double layer_thickness);

    /// Feed one (time, tool z) sample. Returns true when this sample opens a
    /// new layer (never for the very first sample, which opens layer 0).
    /// The entry height advances in whole layer steps.
    bool observe(double t, double z);

    int current_layer() const { return layer_; }
    double layer_start_time() const { return layer_start_t_; }
    double layer_entry_z() const { return entry_z_; }
    bool started() const { return started_; }

private:
    double thickness_;
    double half_thickness_;
    bool started_ = false;
    int layer_ = 0;
    double entry_z_ = 0.0;
    double layer_start_t_ = 0.0;
};

/// Splits a toolpath into layers by tool-height steps. Throws
/// std::invalid_argument for an empty path or non-positive thickness.
std::vector<Layer> segment_layers(const Toolpath& tp, double layer_thickness = 0.8);

}  // namespace amfuse::toolpath
