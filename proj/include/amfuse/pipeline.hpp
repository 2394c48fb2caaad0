#pragma once

// End-to-end orchestration: configuration, simulation, stream ingestion
// and fusion, per-layer reference comparison, tracking and file emission.

#include "amfuse/deviation.hpp"
#include "amfuse/fusion.hpp"
#include "amfuse/reference.hpp"
#include "amfuse/scansim.hpp"
#include "amfuse/tracking.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace amfuse::pipeline {

struct LayerRange {
    int first = 0;
    int last = 0;
    bool contains(int k) const { return k >= first && k <= last; }
};

/// "a..b" or "a". Throws ConfigError.
LayerRange parse_layer_range(const std::string& s);

struct PipelineConfig {
    fusion::FusionParams fusion;
    double active_radius = 10.0; // mm
    bool adaptive = true;        // false forces inactive weighting everywhere
    deposition::DepositionModel deposition;
    scansim::SimulationConfig simulation;
    reference::ReferenceOptions reference;
    deviation::DeviationParams deviation;
    tracking::TrackingParams tracking;
    double layer_thickness = 0.8; // mm
    double max_gap_s = 1.0;       // stream gaps above this raise a warning
    std::filesystem::path toolpath;
    std::filesystem::path streams; // empty: the output directory
    std::filesystem::path out;

    /// Throws ConfigError.
    void validate() const;
};

/// Sets `a.b.c` in a JSON object from "a.b.c=value"; the value is read as
/// JSON when it parses, as a string otherwise. Throws ConfigError.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Missing keys keep their defaults; unknown top-level sections are
/// rejected. Throws ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& c);

/// Reads the file (IoError if unreadable, ConfigError if malformed),
/// applies the overrides, validates.
PipelineConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

struct SimulateResult {
    scansim::SimulationResult sim;
    std::filesystem::path manifest;
};
SimulateResult simulate(const PipelineConfig& config, const toolpath::Toolpath& tp, const std::filesystem::path& out);

struct StageTiming {
    double read_ms = 0.0;
    double integrate_ms = 0.0;
    double mesh_ms = 0.0;
    double reference_ms = 0.0;
    double deviation_ms = 0.0;
    double tracking_ms = 0.0;
    double write_ms = 0.0;
};

struct LayerOutput {
    int layer = 0;
    double t_start = 0.0; // s
    double t_end = 0.0;   // s
    std::size_t profiles = 0;
    deviation::DeviationSummary summary;
    std::vector<deviation::DefectRegion> regions;
    nlohmann::json report;
    std::filesystem::path fused_mesh, reference_mesh, deviation_mesh, report_file;
};

struct RunResult {
    std::vector<LayerOutput> layers;
    std::vector<tracking::DefectTrack> tracks;
    std::size_t profiles = 0;
    std::size_t skipped_profiles = 0; // unparseable or without a pose
    std::size_t points = 0;
    std::size_t scanners = 0;
    double integrate_s = 0.0;
    double wall_s = 0.0;
    StageTiming timing;
    std::vector<std::string> warnings;
    std::filesystem::path final_mesh, final_grid, tracks_csv, manifest;
    std::vector<std::filesystem::path> files;
};

/// Consumes scans_*.jsonl, poses.jsonl and calibration.json from the
/// streams directory. Layers come from tool-height steps in the pose
/// stream; each finished layer (within `layers`, if given) is meshed,
/// compared against the reference up to the layer's end time and tracked
/// before the next layer is ingested. Stream time is toolpath time.
/// Throws StreamError on integrity failures.
RunResult run(const PipelineConfig& config, const toolpath::Toolpath& tp, const std::optional<LayerRange>& layers,
              std::ostream* log = nullptr);

struct CompareResult {
    mesh::TriangleMesh mesh; // a, with scalar_deviation = signed distance to b
    deviation::DeviationSummary summary;
};
/// Signed distance from every vertex of a to the surface of b.
CompareResult compare(const mesh::TriangleMesh& a, const mesh::TriangleMesh& b);

}  // namespace amfuse::pipeline
