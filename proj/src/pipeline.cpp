#include "amfuse/pipeline.hpp"

#include "amfuse/error.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace amfuse::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

LayerRange parse_layer_range(const std::string& s)
{
    auto parse_int = [&](const std::string& t) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (t.empty() || pos != t.size() || v < 0)
            throw ConfigError("bad layer range '" + s + "': expected a..b with non-negative integers");
        return v;
    };
    const auto dots = s.find("..");
    LayerRange r;
    if (dots == std::string::npos) {
        r.first = r.last = parse_int(s);
    } else {
        r.first = parse_int(s.substr(0, dots));
        r.last = parse_int(s.substr(dots + 2));
    }
    if (r.first > r.last)
        throw ConfigError("bad layer range '" + s + "': first layer after last");
    return r;
}

void PipelineConfig::validate() const
{
    try {
        fusion.validate();
        deposition.validate();
        simulation.validate();
        reference.validate();
        deviation.validate();
        tracking.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(active_radius > 0.0))
        throw ConfigError("active region radius must be positive");
    if (!(fusion.truncation >= fusion.voxel_size))
        throw ConfigError("truncation must be at least the voxel size");
    if (!(layer_thickness > 0.0) || !(max_gap_s > 0.0))
        throw ConfigError("layer thickness and max gap must be positive");
}

void apply_override(json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty())
            throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) {
            if (!node->is_null())
                throw ConfigError("override key '" + key + "' descends into a non-object");
            *node = json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
}

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || k == a;
        if (!ok)
            throw ConfigError("unknown config key '" + (section.empty() ? k : section + "." + k) + "'");
    }
}

}  // namespace

PipelineConfig config_from_json(const json& j)
{
    PipelineConfig c;
    try {
        check_keys(j, "", {"fusion", "deposition", "simulation", "reference", "deviation", "tracking", "paths",
                           "layer_thickness_mm", "max_gap_s", "comment"});
        if (j.contains("fusion")) {
            const auto& f = j.at("fusion");
            check_keys(f, "fusion", {"voxel_size_mm", "truncation_mm", "active_radius_mm", "w_cap", "w_max",
                                     "change_threshold_mm", "adaptive"});
            c.fusion.voxel_size = f.value("voxel_size_mm", c.fusion.voxel_size);
            c.fusion.truncation = f.value("truncation_mm", 3.0 * c.fusion.voxel_size);
            c.fusion.w_cap = f.value("w_cap", c.fusion.w_cap);
            c.fusion.w_max = f.value("w_max", c.fusion.w_max);
            c.fusion.change_threshold = f.value("change_threshold_mm", c.fusion.change_threshold);
            c.active_radius = f.value("active_radius_mm", c.active_radius);
            c.adaptive = f.value("adaptive", c.adaptive);
        }
        if (j.contains("deposition"))
            c.deposition = deposition::deposition_model_from_json(j.at("deposition"));
        if (j.contains("simulation"))
            c.simulation = scansim::simulation_config_from_json(j.at("simulation"));
        c.simulation.model = c.deposition;
        if (j.contains("reference")) {
            const auto& r = j.at("reference");
            check_keys(r, "reference", {"heightfield_cell_mm", "roi_margin_mm", "step_sigmas", "max_dt_s"});
            c.reference.cell = r.value("heightfield_cell_mm", c.reference.cell);
            c.reference.roi_margin = r.value("roi_margin_mm", c.reference.roi_margin);
            c.reference.step_sigmas = r.value("step_sigmas", c.reference.step_sigmas);
            c.reference.max_dt = r.value("max_dt_s", c.reference.max_dt);
        }
        if (j.contains("deviation")) {
            const auto& d = j.at("deviation");
            check_keys(d, "deviation", {"delta_G_mm", "delta_L", "A_min_mm2"});
            c.deviation.delta_g = d.value("delta_G_mm", c.deviation.delta_g);
            c.deviation.delta_l = d.value("delta_L", c.deviation.delta_l);
            c.deviation.a_min = d.value("A_min_mm2", c.deviation.a_min);
        }
        if (j.contains("tracking")) {
            const auto& t = j.at("tracking");
            check_keys(t, "tracking", {"k_miss", "s_min_mm_per_layer", "trend_window", "full_3d"});
            c.tracking.k_miss = t.value("k_miss", c.tracking.k_miss);
            c.tracking.s_min = t.value("s_min_mm_per_layer", c.tracking.s_min);
            c.tracking.trend_window = t.value("trend_window", c.tracking.trend_window);
            c.tracking.full_3d = t.value("full_3d", c.tracking.full_3d);
        }
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            check_keys(p, "paths", {"toolpath", "streams", "out"});
            c.toolpath = p.value("toolpath", std::string());
            c.streams = p.value("streams", std::string());
            c.out = p.value("out", std::string());
        }
        c.layer_thickness = j.value("layer_thickness_mm", c.layer_thickness);
        c.max_gap_s = j.value("max_gap_s", c.max_gap_s);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.reference.voxel_size = c.fusion.voxel_size;
    c.reference.truncation = c.fusion.truncation;
    c.reference.layer_thickness = c.layer_thickness;
    c.validate();
    return c;
}

json to_json(const PipelineConfig& c)
{
    json profilers = json::array();
    for (const auto& p : c.simulation.profilers) {
        const auto& r = p.mount.rotation().m;
        const auto& t = p.mount.translation();
        profilers.push_back({{"id", p.id},
                             {"rotation", std::vector<double>(r.begin(), r.end())},
                             {"translation_mm", {t.x, t.y, t.z}},
                             {"points_per_frame", p.points_per_frame},
                             {"fov_width_mm", p.fov_width},
                             {"frame_rate_hz", p.frame_rate},
                             {"noise_sigma_mm", p.noise_sigma},
                             {"trigger_offset_ms", p.trigger_offset_s * 1000.0}});
    }
    json patches = json::array();
    for (const auto& p : c.simulation.patches)
        patches.push_back({{"x_mm", {p.x_min, p.x_max}},
                           {"y_mm", {p.y_min, p.y_max}},
                           {"layers", {p.first_layer, p.last_layer}},
                           {"rate_scale", p.rate_scale}});
    return {{"fusion",
             {{"voxel_size_mm", c.fusion.voxel_size},
              {"truncation_mm", c.fusion.truncation},
              {"active_radius_mm", c.active_radius},
              {"w_cap", c.fusion.w_cap},
              {"w_max", c.fusion.w_max},
              {"change_threshold_mm", c.fusion.change_threshold},
              {"adaptive", c.adaptive}}},
            {"deposition", deposition::to_json(c.deposition)},
            {"simulation",
             {{"profilers", profilers},
              {"occluder",
               {{"enabled", c.simulation.occluder.enabled},
                {"radius_mm", c.simulation.occluder.radius},
                {"standoff_mm", c.simulation.occluder.standoff},
                {"length_mm", c.simulation.occluder.length}}},
              {"patches", patches},
              {"heightfield_cell_mm", c.simulation.cell},
              {"margin_mm", c.simulation.margin},
              {"pose_rate_hz", c.simulation.pose_rate},
              {"seed", c.simulation.seed}}},
            {"reference",
             {{"heightfield_cell_mm", c.reference.cell},
              {"roi_margin_mm", c.reference.roi_margin},
              {"step_sigmas", c.reference.step_sigmas},
              {"max_dt_s", c.reference.max_dt}}},
            {"deviation",
             {{"delta_G_mm", c.deviation.delta_g}, {"delta_L", c.deviation.delta_l}, {"A_min_mm2", c.deviation.a_min}}},
            {"tracking",
             {{"k_miss", c.tracking.k_miss},
              {"s_min_mm_per_layer", c.tracking.s_min},
              {"trend_window", c.tracking.trend_window},
              {"full_3d", c.tracking.full_3d}}},
            {"layer_thickness_mm", c.layer_thickness},
            {"max_gap_s", c.max_gap_s}};
}

PipelineConfig load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides)
{
    json j = json::object();
    if (path) {
        std::ifstream in(*path);
        if (!in)
            throw IoError("cannot read config file: " + path->string());
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(path->string() + ": " + e.what());
        }
    }
    for (const auto& o : overrides)
        apply_override(j, o);
    return config_from_json(j);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void write_json(const fs::path& p, const json& j)
{
    std::ofstream out(p);
    if (!out)
        throw IoError("cannot write " + p.string());
    out << j.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + p.string());
}

void ensure_dir(const fs::path& p)
{
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

std::string layer_dir_name(int k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "layer_%03d", k);
    return buf;
}

json summary_json(const deviation::DeviationSummary& s)
{
    return {{"vertices", s.vertices},
            {"mean_mm", s.mean},
            {"mean_abs_mm", s.mean_abs},
            {"rms_mm", s.rms},
            {"max_abs_mm", s.max_abs}};
}

}  // namespace

SimulateResult simulate(const PipelineConfig& config, const toolpath::Toolpath& tp, const fs::path& out)
{
    config.validate();
    scansim::SimulationConfig sc = config.simulation;
    sc.model = config.deposition;
    SimulateResult r;
    r.sim = scansim::run_simulation(tp, sc, out);
    json files = json::array();
    for (const auto& f : r.sim.scan_files)
        files.push_back(f.filename().string());
    files.push_back(r.sim.pose_file.filename().string());
    files.push_back(r.sim.truth_file.filename().string());
    files.push_back(r.sim.calibration_file.filename().string());
    r.manifest = out / "sim_manifest.json";
    write_json(r.manifest, {{"toolpath", config.toolpath.string()},
                            {"seed", sc.seed},
                            {"duration_s", tp.total_duration()},
                            {"profiles_per_scanner", r.sim.frames},
                            {"poses", r.sim.poses},
                            {"deposited_volume_mm3", r.sim.deposited_volume},
                            {"units", "mm, s"},
                            {"files", files}});
    return r;
}

RunResult run(const PipelineConfig& config, const toolpath::Toolpath& tp, const std::optional<LayerRange>& layers,
              std::ostream* log)
{
    config.validate();
    const auto wall0 = Clock::now();
    RunResult res;
    const fs::path out = config.out.empty() ? fs::path(".") : config.out;
    const fs::path streams_dir = config.streams.empty() ? out : config.streams;
    ensure_dir(out);

    auto t0 = Clock::now();
    const geom::CalibrationSet calib = geom::load_calibration(streams_dir / "calibration.json");
    const streams::PoseTrack poses = streams::PoseTrack::load(streams_dir / "poses.jsonl");
    std::vector<fs::path> scan_paths;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(streams_dir, ec)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("scans_", 0) == 0 && e.path().extension() == ".jsonl")
            scan_paths.push_back(e.path());
    }
    if (ec)
        throw IoError("cannot list " + streams_dir.string() + ": " + ec.message());
    if (scan_paths.empty())
        throw StreamError("no scans_*.jsonl streams in " + streams_dir.string());
    std::sort(scan_paths.begin(), scan_paths.end());
    std::vector<std::unique_ptr<streams::FrameReader>> readers;
    for (const auto& p : scan_paths)
        readers.push_back(std::make_unique<streams::FrameReader>(p));
    res.scanners = readers.size();

    // layer boundaries from tool-height steps of the pose stream
    std::vector<std::int64_t> layer_starts{poses.first_time()};
    {
        toolpath::LayerSegmenter seg(config.layer_thickness);
        for (const auto& s : poses.samples())
            if (seg.observe(static_cast<double>(s.t_us) * 1e-6, s.pose.translation().z))
                layer_starts.push_back(s.t_us);
    }
    const int layer_count = static_cast<int>(layer_starts.size());
    if (layers && layers->first >= layer_count)
        throw ConfigError("layer range starts at " + std::to_string(layers->first) + " but the streams hold " +
                          std::to_string(layer_count) + " layers");
    if (poses.max_gap() > static_cast<std::int64_t>(config.max_gap_s * 1e6))
        res.warnings.push_back("pose stream has a gap of " + std::to_string(poses.max_gap() / 1000) + " ms");
    res.timing.read_ms += ms_since(t0);

    fusion::SparseTsdfGrid grid(config.fusion);
    reference::ReferenceBuilder refb(tp, config.deposition, config.reference);
    tracking::Tracker tracker(config.tracking);
    fusion::ActiveRegion region;
    region.radius = config.active_radius;

    res.tracks_csv = out / "tracks.csv";
    std::ofstream csv(res.tracks_csv);
    if (!csv)
        throw IoError("cannot write " + res.tracks_csv.string());
    csv << tracking::csv_header();
    res.files.push_back(res.tracks_csv);

    std::size_t layer_profiles = 0;
    auto finish_layer = [&](int k, std::int64_t t_end_us) {
        const std::size_t profiles = layer_profiles;
        layer_profiles = 0;
        if (layers && !layers->contains(k))
            return;
        LayerOutput lo;
        lo.layer = k;
        lo.t_start = static_cast<double>(layer_starts[static_cast<std::size_t>(k)]) * 1e-6;
        lo.t_end = static_cast<double>(t_end_us) * 1e-6;
        lo.profiles = profiles;
        const fs::path dir = out / "layers" / layer_dir_name(k);
        ensure_dir(dir);

        auto ts = Clock::now();
        const mesh::TriangleMesh fused = mesh::marching_cubes(grid.snapshot());
        res.timing.mesh_ms += ms_since(ts);

        ts = Clock::now();
        const auto ref = refb.at_time(std::min(lo.t_end, tp.total_duration()), k);
        const mesh::TriangleMesh ref_mesh = ref.empty() ? mesh::TriangleMesh{} : reference::reference_mesh(ref);
        res.timing.reference_ms += ms_since(ts);

        ts = Clock::now();
        deviation::DeviationMap map;
        const mesh::TriangleMesh cropped = deviation::crop_xy(fused, ref.roi);
        if (!cropped.empty() && !ref_mesh.empty()) {
            map = deviation::compute_deviation(cropped, deviation::ReferenceQuery(ref.grid, ref_mesh));
            deviation::classify(map, config.deviation.delta_g, config.deviation.delta_l);
            lo.regions = deviation::segment(map, config.deviation.a_min, k);
        } else {
            res.warnings.push_back("layer " + std::to_string(k) + ": nothing to compare");
        }
        lo.summary = deviation::summarize(map.d);
        res.timing.deviation_ms += ms_since(ts);

        ts = Clock::now();
        tracker.associate(lo.regions, k);
        const tracking::GlobalSummary g{lo.summary.mean, lo.summary.max_abs};
        lo.report = tracking::layer_report(tracker.tracks(), k, g, config.tracking);
        lo.report["t_end_s"] = lo.t_end;
        lo.report["profiles"] = profiles;
        lo.report["deviation"] = summary_json(lo.summary);
        std::map<std::string, int> by_class;
        for (const auto& r : lo.regions)
            ++by_class[std::string(deviation::to_string(r.cls))];
        lo.report["regions"] = by_class;
        lo.report["units"] = "mm, mm^2";
        res.timing.tracking_ms += ms_since(ts);

        ts = Clock::now();
        lo.fused_mesh = dir / "fused.ply";
        mesh::write_ply(lo.fused_mesh, fused);
        lo.reference_mesh = dir / "reference.ply";
        mesh::write_ply(lo.reference_mesh, ref_mesh);
        res.files.push_back(lo.fused_mesh);
        res.files.push_back(lo.reference_mesh);
        if (!map.d.empty()) {
            lo.deviation_mesh = dir / "deviation.ply";
            mesh::write_ply(lo.deviation_mesh, deviation::deviation_mesh(map, config.deviation.delta_g));
            res.files.push_back(lo.deviation_mesh);
        }
        lo.report_file = dir / "report.json";
        write_json(lo.report_file, lo.report);
        res.files.push_back(lo.report_file);
        csv << tracking::csv_rows(tracker.tracks(), k, config.tracking);
        csv.flush();
        res.timing.write_ms += ms_since(ts);

        if (log) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "layer %d: t_end %.2f s, %zu profiles, mean |d| %.3f mm, max |d| %.3f mm, %zu regions\n", k,
                          lo.t_end, profiles, lo.summary.mean_abs, lo.summary.max_abs, lo.regions.size());
            *log << buf << std::flush;
        }
        res.layers.push_back(std::move(lo));
    };

    std::vector<std::optional<streams::ProfileFrame>> heads(readers.size());
    t0 = Clock::now();
    for (std::size_t i = 0; i < readers.size(); ++i)
        heads[i] = readers[i]->next();
    res.timing.read_ms += ms_since(t0);

    int layer = 0;
    auto layer_end = [&](int k) {
        return k + 1 < layer_count ? layer_starts[static_cast<std::size_t>(k + 1)] : INT64_MAX;
    };
    std::map<int, std::int64_t> last_seen;
    bool missing_pose_warned = false;
    std::vector<geom::Point3> origins, points;
    bool stopped = false;
    for (;;) {
        std::size_t pick = readers.size();
        for (std::size_t i = 0; i < readers.size(); ++i)
            if (heads[i] && (pick == readers.size() || heads[i]->t_us < heads[pick]->t_us))
                pick = i;
        if (pick == readers.size())
            break;
        const streams::ProfileFrame f = std::move(*heads[pick]);
        t0 = Clock::now();
        heads[pick] = readers[pick]->next();
        res.timing.read_ms += ms_since(t0);

        while (f.t_us >= layer_end(layer)) {
            finish_layer(layer, layer_end(layer));
            ++layer;
        }
        if (layers && layer > layers->last) {
            stopped = true;
            break;
        }
        auto [it, fresh] = last_seen.try_emplace(f.scanner_id, f.t_us);
        if (!fresh) {
            if (f.t_us - it->second > static_cast<std::int64_t>(config.max_gap_s * 1e6))
                res.warnings.push_back("scanner " + std::to_string(f.scanner_id) + " stream gap of " +
                                       std::to_string((f.t_us - it->second) / 1000) + " ms");
            it->second = f.t_us;
        }
        const auto pose = poses.at(f.t_us);
        if (!pose) {
            ++res.skipped_profiles;
            if (!missing_pose_warned)
                res.warnings.push_back("profiles outside the pose stream were skipped");
            missing_pose_warned = true;
            continue;
        }
        const auto cal = calib.find(f.scanner_id);
        if (cal == calib.end())
            throw StreamError("no calibration for scanner " + std::to_string(f.scanner_id));
        const geom::RigidTransform to_O = geom::compose(*pose, cal->second);
        origins.clear();
        points.clear();
        for (std::size_t i = 0; i < f.points.size(); ++i) {
            if (!f.valid[i])
                continue;
            origins.push_back(to_O.apply({f.points[i][0], 0.0, 0.0}));
            points.push_back(to_O.apply({f.points[i][0], 0.0, f.points[i][1]}));
        }
        region = fusion::update_active_region(region, pose->translation());
        t0 = Clock::now();
        grid.integrate_rays(origins, points, config.adaptive ? &region : nullptr);
        res.integrate_s += ms_since(t0) * 1e-3;
        res.points += points.size();
        ++res.profiles;
        ++layer_profiles;
    }
    for (const auto& r : readers)
        res.skipped_profiles += r->skipped();
    if (!stopped && res.profiles > 0)
        finish_layer(layer, poses.last_time());

    t0 = Clock::now();
    const auto final_view = grid.snapshot();
    res.final_mesh = out / "final.ply";
    mesh::write_ply(res.final_mesh, mesh::marching_cubes(final_view));
    res.final_grid = out / "final.atsd";
    fusion::save_grid(res.final_grid, final_view);
    res.files.push_back(res.final_mesh);
    res.files.push_back(res.final_grid);
    res.timing.write_ms += ms_since(t0);
    res.tracks = tracker.tracks();
    res.wall_s = ms_since(wall0) * 1e-3;

    const double frames = static_cast<double>(res.profiles) / static_cast<double>(std::max<std::size_t>(res.scanners, 1));
    json layer_list = json::array();
    for (const auto& lo : res.layers)
        layer_list.push_back({{"layer", lo.layer},
                              {"t_start_s", lo.t_start},
                              {"t_end_s", lo.t_end},
                              {"profiles", lo.profiles},
                              {"regions", lo.regions.size()},
                              {"fused_mesh", fs::relative(lo.fused_mesh, out).string()},
                              {"reference_mesh", fs::relative(lo.reference_mesh, out).string()},
                              {"deviation_mesh", lo.deviation_mesh.empty() ? "" : fs::relative(lo.deviation_mesh, out).string()},
                              {"report", fs::relative(lo.report_file, out).string()}});
    res.manifest = out / "run_manifest.json";
    res.files.push_back(res.manifest);
    json files = json::array();
    for (const auto& f : res.files)
        files.push_back(fs::relative(f, out).string());
    const json manifest = {
        {"config", to_json(config)},
        {"inputs", {{"streams", streams_dir.string()}, {"toolpath", config.toolpath.string()}, {"scan_streams", scan_paths.size()}}},
        {"layers", layer_list},
        {"counts",
         {{"scanners", res.scanners},
          {"profiles", res.profiles},
          {"skipped_profiles", res.skipped_profiles},
          {"points", res.points},
          {"layers_detected", layer_count}}},
        {"timing",
         {{"wall_s", res.wall_s},
          {"frames", frames},
          {"frames_per_s", res.wall_s > 0.0 ? frames / res.wall_s : 0.0},
          {"integrate_frames_per_s", res.integrate_s > 0.0 ? frames / res.integrate_s : 0.0},
          {"mean_frame_integrate_ms", frames > 0.0 ? res.integrate_s * 1e3 / frames : 0.0},
          {"stage_ms",
           {{"read", res.timing.read_ms},
            {"integrate", res.integrate_s * 1e3},
            {"mesh", res.timing.mesh_ms},
            {"reference", res.timing.reference_ms},
            {"deviation", res.timing.deviation_ms},
            {"tracking", res.timing.tracking_ms},
            {"write", res.timing.write_ms}}}}},
        {"warnings", res.warnings},
        {"files", files},
        {"units", "mm, s"}};
    write_json(res.manifest, manifest);
    return res;
}

CompareResult compare(const mesh::TriangleMesh& a, const mesh::TriangleMesh& b)
{
    if (a.vertices.empty() || b.empty())
        throw std::invalid_argument("compare needs two non-empty meshes");
    const mesh::MeshDistance md(b);
    CompareResult r;
    r.mesh = a;
    r.mesh.colors.clear();
    r.mesh.scalar.resize(a.vertices.size());
    for (std::size_t v = 0; v < a.vertices.size(); ++v)
        r.mesh.scalar[v] = md.signed_distance(a.vertices[v]);
    r.summary = deviation::summarize(r.mesh.scalar);
    return r;
}

}  // namespace amfuse::pipeline
