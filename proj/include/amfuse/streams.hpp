#pragma once

// JSON Lines scan and pose streams exchanged between the simulator (or a
// recording rig) and the reconstruction pipeline.
//
//   scan:  {"t_us": 1000, "scanner_id": 0, "valid_mask": [1, 0, ...],
//           "points": [[x_l_mm, z_l_mm], [x_l_mm, null], ...]}
//   pose:  {"t_us": 1000, "r": [9 row-major], "t": [x_mm, y_mm, z_mm]}

#include "amfuse/geomcore.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace amfuse::streams {

/// One profile in the scanner plane: lateral x_l and range z_l (mm).
struct ProfileFrame {
    std::int64_t t_us = 0;
    int scanner_id = 0;
    std::vector<std::uint8_t> valid;
    std::vector<std::array<double, 2>> points;

    std::size_t valid_count() const;
};

struct PoseSample {
    std::int64_t t_us = 0;
    geom::RigidTransform pose; // work object <- base
};

std::string format_frame(const ProfileFrame& f);
std::string format_pose(const PoseSample& p);

/// Throw ParseError on malformed records.
ProfileFrame parse_frame(std::string_view line);
PoseSample parse_pose(std::string_view line);

/// Line reader over a frame stream. Malformed lines are counted and
/// skipped; a timestamp that goes backwards throws StreamError.
class FrameReader {
public:
    explicit FrameReader(const std::filesystem::path& path);
    std::optional<ProfileFrame> next();
    std::size_t skipped() const { return skipped_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
    std::size_t skipped_ = 0;
    std::int64_t last_t_ = INT64_MIN;
};

/// Whole pose stream with time interpolation. Samples must be strictly
/// increasing in time (StreamError otherwise).
class PoseTrack {
public:
    PoseTrack() = default;
    explicit PoseTrack(std::vector<PoseSample> samples);
    static PoseTrack load(const std::filesystem::path& path);

    bool empty() const { return samples_.empty(); }
    std::size_t size() const { return samples_.size(); }
    const std::vector<PoseSample>& samples() const { return samples_; }
    std::int64_t first_time() const { return samples_.front().t_us; }
    std::int64_t last_time() const { return samples_.back().t_us; }

    /// Translation interpolated linearly, rotation taken from the nearer
    /// sample. Empty outside the covered interval.
    std::optional<geom::RigidTransform> at(std::int64_t t_us) const;

    /// Largest gap between consecutive samples (us).
    std::int64_t max_gap() const;

private:
    std::vector<PoseSample> samples_;
};

}  // namespace amfuse::streams
