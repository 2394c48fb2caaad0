// amfuse command-line front end.
//
// Exit codes: 0 ok, 2 configuration, 3 I/O, 4 stream integrity, 1 other.

#include "amfuse/error.hpp"
#include "amfuse/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace amfuse;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::string toolpath;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string layers;
    std::vector<std::string> sets;
    std::string mesh_a, mesh_b;
};

pipeline::PipelineConfig resolve(const Options& o)
{
    std::vector<std::string> sets = o.sets;
    if (!o.toolpath.empty())
        sets.push_back("paths.toolpath=\"" + o.toolpath + "\"");
    if (!o.out.empty())
        sets.push_back("paths.out=\"" + o.out + "\"");
    if (o.seed)
        sets.push_back("simulation.seed=" + std::to_string(*o.seed));
    std::optional<fs::path> path;
    if (!o.config.empty())
        path = o.config;
    pipeline::PipelineConfig c = pipeline::load_config(path, sets);
    if (c.out.empty())
        c.out = ".";
    // relative paths inside a config file are taken from the file's directory
    if (path) {
        const fs::path base = path->parent_path();
        auto rebase = [&](fs::path& p, bool from_flag) {
            if (!p.empty() && p.is_relative() && !from_flag)
                p = base / p;
        };
        rebase(c.toolpath, !o.toolpath.empty());
        rebase(c.streams, false);
    }
    return c;
}

toolpath::Toolpath load_toolpath(const pipeline::PipelineConfig& c)
{
    if (c.toolpath.empty())
        throw ConfigError("no toolpath given (--toolpath or paths.toolpath)");
    return toolpath::parse_toolpath(c.toolpath);
}

std::optional<pipeline::LayerRange> layer_range(const Options& o)
{
    if (o.layers.empty())
        return std::nullopt;
    return pipeline::parse_layer_range(o.layers);
}

int cmd_simulate(const Options& o)
{
    const auto c = resolve(o);
    const auto tp = load_toolpath(c);
    const auto r = pipeline::simulate(c, tp, c.out);
    std::size_t frames = 0;
    for (auto f : r.sim.frames)
        frames += f;
    std::printf("simulated %.2f s: %zu profiles from %zu scanners, %zu poses, deposited %.1f mm^3\n",
                tp.total_duration(), frames, r.sim.scan_files.size(), r.sim.poses, r.sim.deposited_volume);
    std::printf("wrote %s\n", r.manifest.string().c_str());
    return 0;
}

int cmd_run(const Options& o)
{
    const auto c = resolve(o);
    const auto tp = load_toolpath(c);
    const auto r = pipeline::run(c, tp, layer_range(o), &std::cout);
    for (const auto& w : r.warnings)
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    const double frames = static_cast<double>(r.profiles) / static_cast<double>(std::max<std::size_t>(r.scanners, 1));
    std::printf("%zu profiles (%zu skipped), %zu points, %.1f frames/s overall, %.2f ms mean frame integration\n",
                r.profiles, r.skipped_profiles, r.points, r.wall_s > 0 ? frames / r.wall_s : 0.0,
                frames > 0 ? r.integrate_s * 1e3 / frames : 0.0);
    std::printf("wrote %s\n", r.manifest.string().c_str());
    return 0;
}

int cmd_reference(const Options& o)
{
    const auto c = resolve(o);
    const auto tp = load_toolpath(c);
    reference::ReferenceBuilder b(tp, c.deposition, c.reference);
    const auto range = layer_range(o);
    const int count = static_cast<int>(b.layers().size());
    if (range && range->first >= count)
        throw ConfigError("layer range starts beyond the toolpath's " + std::to_string(count) + " layers");
    json index = json::array();
    for (int k = 0; k < count; ++k) {
        if (range && k > range->last)
            break;
        const auto model = b.at_layer(k);
        if (range && !range->contains(k))
            continue;
        char name[64];
        std::snprintf(name, sizeof name, "reference_layer_%03d.ply", k);
        const fs::path file = c.out / name;
        fs::create_directories(c.out);
        const auto m = model.empty() ? mesh::TriangleMesh{} : reference::reference_mesh(model);
        mesh::write_ply(file, m);
        index.push_back({{"layer", k},
                         {"time_s", model.time},
                         {"max_height_mm", model.height.max_height()},
                         {"file", file.filename().string()}});
        std::printf("layer %d: t %.2f s, max height %.3f mm, %zu triangles\n", k, model.time,
                    model.height.max_height(), m.triangles.size());
    }
    std::ofstream out(c.out / "reference_manifest.json");
    if (!out)
        throw IoError("cannot write " + (c.out / "reference_manifest.json").string());
    out << json({{"layers", index}, {"config", pipeline::to_json(c)}, {"units", "mm, s"}}).dump(2) << '\n';
    return 0;
}

int cmd_compare(const Options& o)
{
    const auto a = mesh::read_ply(o.mesh_a);
    const auto b = mesh::read_ply(o.mesh_b);
    const auto r = pipeline::compare(a, b);
    const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
    fs::create_directories(out);
    mesh::write_ply(out / "compare.ply", r.mesh);
    const json summary = {{"mesh_a", o.mesh_a},
                          {"mesh_b", o.mesh_b},
                          {"vertices", r.summary.vertices},
                          {"mean_mm", r.summary.mean},
                          {"mean_abs_mm", r.summary.mean_abs},
                          {"rms_mm", r.summary.rms},
                          {"max_abs_mm", r.summary.max_abs},
                          {"units", "mm"}};
    std::ofstream js(out / "compare.json");
    if (!js)
        throw IoError("cannot write " + (out / "compare.json").string());
    js << summary.dump(2) << '\n';
    std::printf("vertices %zu mean %.4f mm rms %.4f mm max |d| %.4f mm\n", r.summary.vertices, r.summary.mean,
                r.summary.rms, r.summary.max_abs);
    return 0;
}

json read_json(const fs::path& p)
{
    std::ifstream in(p);
    if (!in)
        throw IoError("cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

int cmd_report(const Options& o)
{
    const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
    const json m = read_json(dir / "run_manifest.json");
    const auto range = layer_range(o);
    std::printf("%-6s %10s %10s %10s %10s %8s\n", "layer", "t_end_s", "mean_mm", "rms_mm", "max_mm", "tracks");
    for (const auto& l : m.at("layers")) {
        const int k = l.at("layer").get<int>();
        if (range && !range->contains(k))
            continue;
        const json rep = read_json(dir / l.at("report").get<std::string>());
        const auto& d = rep.at("deviation");
        std::printf("%-6d %10.2f %10.4f %10.4f %10.4f %8zu\n", k, rep.at("t_end_s").get<double>(),
                    d.at("mean_mm").get<double>(), d.at("rms_mm").get<double>(), d.at("max_abs_mm").get<double>(),
                    rep.at("tracks").size());
        for (const auto& t : rep.at("tracks"))
            std::printf("    track %d %-11s area %8.1f mm^2 height %.2f mm peak %.2f mm %s\n", t.at("id").get<int>(),
                        t.at("class").get<std::string>().c_str(), t.at("area_mm2").get<double>(),
                        t.at("height_mm").get<double>(), t.at("peak_dev_mm").get<double>(),
                        t.at("trend").get<std::string>().c_str());
    }
    const auto& timing = m.at("timing");
    std::printf("throughput %.1f frames/s, mean frame integration %.2f ms\n", timing.at("frames_per_s").get<double>(),
                timing.at("mean_frame_integrate_ms").get<double>());
    for (const auto& w : m.at("warnings"))
        std::printf("warning: %s\n", w.get<std::string>().c_str());
    return 0;
}

int guarded(int (*fn)(const Options&), const Options& o)
{
    try {
        return fn(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const StreamError& e) {
        std::fprintf(stderr, "stream error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

void common(CLI::App* c, Options& o, bool needs_toolpath)
{
    c->add_option("--config", o.config, "JSON configuration file");
    if (needs_toolpath)
        c->add_option("--toolpath", o.toolpath, "toolpath CSV");
    c->add_option("--out", o.out, "output directory");
    c->add_option("--set", o.sets, "override a config value, key.path=value")->take_all();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"amfuse: layer-wise reconstruction and deviation tracking for sprayed builds"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "write synthetic scan and pose streams for a toolpath");
    common(sim, o, true);
    sim->add_option("--seed", o.seed, "noise seed");

    auto* run = app.add_subcommand("run", "fuse streams, compare each layer against the reference and track defects");
    common(run, o, true);
    run->add_option("--layers", o.layers, "analyse layers a..b only");

    auto* ref = app.add_subcommand("reference", "write the reference surface after each layer");
    common(ref, o, true);
    ref->add_option("--layers", o.layers, "layers a..b only");

    auto* cmp = app.add_subcommand("compare", "signed distance of mesh_a against mesh_b");
    cmp->add_option("mesh_a", o.mesh_a, "PLY mesh")->required();
    cmp->add_option("mesh_b", o.mesh_b, "PLY mesh")->required();
    cmp->add_option("--out", o.out, "output directory");

    auto* rep = app.add_subcommand("report", "summarise the outputs of a run");
    rep->add_option("--out", o.out, "run output directory");
    rep->add_option("--layers", o.layers, "layers a..b only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (sim->parsed())
        return guarded(cmd_simulate, o);
    if (run->parsed())
        return guarded(cmd_run, o);
    if (ref->parsed())
        return guarded(cmd_reference, o);
    if (cmp->parsed())
        return guarded(cmd_compare, o);
    return guarded(cmd_report, o);
}
