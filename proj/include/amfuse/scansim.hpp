#pragma once

// Desk-scale stand-in for the spray cell: grows a heightfield by Gaussian
// deposition along a toolpath while virtual line profilers fixed in the
// base frame scan the moving substrate.

#include "amfuse/deposition.hpp"
#include "amfuse/meshing.hpp"
#include "amfuse/streams.hpp"
#include "amfuse/toolpath.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace amfuse::scansim {

using geom::Point3;
using geom::RigidTransform;
using geom::Vec3;

/// Parallel-beam line profiler. Sample i sits at lateral position
/// x_l = -fov/2 + i * fov / (n - 1) on the sensor's x axis and looks
/// along +z_l.
struct VirtualProfiler {
    int id = 0;
    RigidTransform mount;          // base <- scanner
    int points_per_frame = 640;
    double fov_width = 60.0;       // mm
    double frame_rate = 10.0;      // Hz
    double noise_sigma = 0.05;     // mm, along the viewing ray
    double trigger_offset_s = 0.0; // delay after the common trigger

    void validate() const;
    double lateral(int i) const;
};

/// Mount for a profiler whose laser line is centred on `line_center` (base
/// frame, on the nozzle's working plane) and runs along `lateral_axis`,
/// viewed from `standoff` mm away with the laser plane tilted by `tilt_deg`
/// about the line direction.
RigidTransform profiler_mount(const Point3& line_center, const Vec3& lateral_axis, double tilt_deg, double standoff);

/// Three profilers around the nozzle, 100 mm standoff, 10 deg tilt,
/// triggered at 0, 20 and 40 ms.
std::vector<VirtualProfiler> default_profilers();

/// Vertical nozzle cylinder in the base frame (axis through the origin),
/// spanning z in [standoff, standoff + length]. Rays crossing it before
/// reaching the surface are marked invalid.
struct NozzleOccluder {
    bool enabled = false;
    double radius = 5.0;
    double standoff = 20.0;
    double length = 60.0;

    bool blocks(const Point3& from_B, const Point3& to_B) const;
};

/// Ray/heightfield intersection: the first point along o + t u (u unit)
/// where the ray meets z = h(x, y). Empty when it never does.
std::optional<double> intersect_heightfield(const deposition::HeightField& h, double max_height, const Point3& o,
                                            const Vec3& u);

/// Scans the heightfield with one profiler. With `rng == nullptr` or zero
/// noise the ranges are exact.
streams::ProfileFrame scan_frame(const deposition::HeightField& h, const VirtualProfiler& p,
                                 const RigidTransform& pose_OB, std::int64_t t_us, std::mt19937_64* rng = nullptr,
                                 const NozzleOccluder& occluder = {});

/// Open sheet through the cell centres, normals up.
mesh::TriangleMesh heightfield_mesh(const deposition::HeightField& h);

struct SimulationConfig {
    deposition::DepositionModel model;
    std::vector<VirtualProfiler> profilers = default_profilers();
    NozzleOccluder occluder;
    std::vector<deposition::RatePatch> patches;
    double cell = 0.5;          // heightfield cell (mm)
    double margin = 40.0;       // heightfield extent beyond the toolpath bounds (mm)
    double pose_rate = 100.0;   // Hz
    double step_sigmas = 0.5;   // quadrature step bound in plume sigmas of travel
    double max_dt = 0.05;       // s
    std::uint64_t seed = 1;

    void validate() const;
};

/// {"deposition": {...}, "profilers": [...], "occluder": {...}, "patches": [...], ...}
/// Missing keys keep their defaults. Throws ConfigError.
SimulationConfig simulation_config_from_json(const nlohmann::json& j);

struct SimulationResult {
    std::vector<std::filesystem::path> scan_files; // one per profiler
    std::filesystem::path pose_file;
    std::filesystem::path truth_file;
    std::filesystem::path calibration_file;
    std::vector<std::size_t> frames; // per profiler
    std::size_t poses = 0;
    double deposited_volume = 0.0; // mm^3
    double zeta_time = 0.0;        // integral of zeta * rate scale over spray-on time (s)
    deposition::HeightField truth;
};

/// Frames for profiler j are emitted at k / frame_rate + trigger_offset for
/// every such time strictly before the end of the path; poses at
/// pose_rate over the closed interval. Single threaded and deterministic
/// for a given seed.
SimulationResult run_simulation(const toolpath::Toolpath& path, const SimulationConfig& config,
                                const std::filesystem::path& out_dir);

}  // namespace amfuse::scansim
