#include "amfuse/scansim.hpp"

#include "amfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace amfuse::scansim {

using deposition::HeightField;
using nlohmann::json;

void VirtualProfiler::validate() const
{
    if (points_per_frame < 2)
        throw std::invalid_argument("profiler needs at least 2 points per frame");
    if (!(frame_rate > 0.0) || !(fov_width > 0.0) || !(noise_sigma >= 0.0) || !(trigger_offset_s >= 0.0))
        throw std::invalid_argument("profiler rate, width, noise and trigger offset must be positive");
}

double VirtualProfiler::lateral(int i) const
{
    return -0.5 * fov_width + static_cast<double>(i) * fov_width / static_cast<double>(points_per_frame - 1);
}

RigidTransform profiler_mount(const Point3& line_center, const Vec3& lateral_axis, double tilt_deg, double standoff)
{
    const Vec3 x = geom::normalized(Vec3{lateral_axis.x, lateral_axis.y, 0.0});
    if (geom::norm(x) == 0.0)
        throw std::invalid_argument("profiler lateral axis must have a horizontal component");
    const Vec3 z0{0.0, 0.0, -1.0};
    const Vec3 y0 = geom::cross(z0, x);
    const double a = tilt_deg * std::numbers::pi / 180.0;
    const Vec3 y = y0 * std::cos(a) + z0 * std::sin(a);
    const Vec3 z = z0 * std::cos(a) - y0 * std::sin(a);
    geom::Mat3 r;
    for (int i = 0; i < 3; ++i) {
        r(i, 0) = x[i];
        r(i, 1) = y[i];
        r(i, 2) = z[i];
    }
    return RigidTransform::from_calibration(r, line_center - z * standoff);
}

std::vector<VirtualProfiler> default_profilers()
{
    // Lateral axes are chosen so a positive tilt leans each sensor away
    // from the nozzle.
    const struct {
        Point3 center;
        Vec3 axis;
    } layout[3] = {{{-8.0, 0.0, 0.0}, {0.0, -1.0, 0.0}}, {{8.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, {{0.0, 8.0, 0.0}, {-1.0, 0.0, 0.0}}};
    std::vector<VirtualProfiler> out;
    for (int j = 0; j < 3; ++j) {
        VirtualProfiler p;
        p.id = j;
        p.mount = profiler_mount(layout[j].center, layout[j].axis, 10.0, 100.0);
        p.trigger_offset_s = 0.02 * j;
        out.push_back(p);
    }
    return out;
}

bool NozzleOccluder::blocks(const Point3& a, const Point3& b) const
{
    if (!enabled)
        return false;
    const Vec3 d = b - a;
    double lo = 0.0, hi = 1.0;
    // slab in z
    const double z0 = standoff, z1 = standoff + length;
    if (d.z == 0.0) {
        if (a.z < z0 || a.z > z1)
            return false;
    } else {
        double s0 = (z0 - a.z) / d.z, s1 = (z1 - a.z) / d.z;
        if (s0 > s1)
            std::swap(s0, s1);
        lo = std::max(lo, s0);
        hi = std::min(hi, s1);
    }
    if (lo > hi)
        return false;
    // infinite cylinder x^2 + y^2 <= r^2
    const double qa = d.x * d.x + d.y * d.y;
    const double qb = 2.0 * (a.x * d.x + a.y * d.y);
    const double qc = a.x * a.x + a.y * a.y - radius * radius;
    if (qa == 0.0)
        return qc <= 0.0;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0)
        return false;
    const double sq = std::sqrt(disc);
    const double c0 = (-qb - sq) / (2.0 * qa), c1 = (-qb + sq) / (2.0 * qa);
    return std::max(lo, c0) <= std::min(hi, c1);
}

std::optional<double> intersect_heightfield(const HeightField& h, double max_height, const Point3& o, const Vec3& u)
{
    if (!(u.z < 0.0))
        return std::nullopt;
    auto g = [&](double t) { return o.z + t * u.z - h.sample(o.x + t * u.x, o.y + t * u.y); };
    const double top = max_height + 1e-9;
    double t0 = o.z > top ? (o.z - top) / -u.z : 0.0;
    const double t1 = std::max(o.z, 0.0) / -u.z;
    if (g(t0) <= 0.0)
        return t0 > 0.0 ? std::optional<double>(t0) : std::nullopt;
    constexpr double step = 0.25;
    double ta = t0;
    for (;;) {
        const double tb = std::min(ta + step, t1);
        if (g(tb) <= 0.0) {
            double lo = ta, hi = tb;
            for (int k = 0; k < 60 && hi - lo > 1e-10; ++k) {
                const double mid = 0.5 * (lo + hi);
                (g(mid) > 0.0 ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        if (tb >= t1)
            return std::nullopt;
        ta = tb;
    }
}

streams::ProfileFrame scan_frame(const HeightField& h, const VirtualProfiler& p, const RigidTransform& pose_OB,
                                 std::int64_t t_us, std::mt19937_64* rng, const NozzleOccluder& occluder)
{
    const RigidTransform to_O = geom::compose(pose_OB, p.mount);
    const Vec3 u = to_O.apply_direction({0.0, 0.0, 1.0});
    const Vec3 u_B = p.mount.apply_direction({0.0, 0.0, 1.0});
    const double max_h = h.max_height();
    std::normal_distribution<double> noise(0.0, p.noise_sigma > 0.0 ? p.noise_sigma : 1.0);
    const bool noisy = rng != nullptr && p.noise_sigma > 0.0;

    streams::ProfileFrame f;
    f.t_us = t_us;
    f.scanner_id = p.id;
    const auto n = static_cast<std::size_t>(p.points_per_frame);
    f.valid.assign(n, 0);
    f.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xl = p.lateral(static_cast<int>(i));
        f.points[i] = {xl, 0.0};
        const Point3 o = to_O.apply({xl, 0.0, 0.0});
        const auto t = intersect_heightfield(h, max_h, o, u);
        if (!t)
            continue;
        const Point3 o_B = p.mount.apply({xl, 0.0, 0.0});
        if (occluder.blocks(o_B, o_B + u_B * *t))
            continue;
        f.points[i][1] = *t + (noisy ? noise(*rng) : 0.0);
        f.valid[i] = 1;
    }
    return f;
}

mesh::TriangleMesh heightfield_mesh(const HeightField& h)
{
    mesh::TriangleMesh m;
    const std::size_t nx = h.nx(), ny = h.ny();
    m.vertices.reserve(nx * ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            m.vertices.push_back({h.center_x(i), h.center_y(j), h.at(i, j)});
    auto id = [nx](std::size_t i, std::size_t j) { return static_cast<std::uint32_t>(j * nx + i); };
    m.triangles.reserve(2 * (nx - 1) * (ny - 1));
    for (std::size_t j = 0; j + 1 < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return m;
}

void SimulationConfig::validate() const
{
    model.validate();
    if (profilers.empty())
        throw std::invalid_argument("simulation needs at least one profiler");
    for (const auto& p : profilers)
        p.validate();
    if (!(cell > 0.0) || !(margin >= 0.0) || !(pose_rate >= 100.0) || !(step_sigmas > 0.0) || !(max_dt > 0.0))
        throw std::invalid_argument("simulation: cell, step and pose rate (>= 100 Hz) must be positive");
    if (occluder.enabled && (!(occluder.radius > 0.0) || !(occluder.length > 0.0)))
        throw std::invalid_argument("occluder radius and length must be positive");
}

namespace {

Vec3 vec3_from(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3)
        throw ConfigError("expected a 3-vector");
    return {v[0], v[1], v[2]};
}

}  // namespace

SimulationConfig simulation_config_from_json(const json& j)
{
    SimulationConfig c;
    try {
        if (j.contains("deposition"))
            c.model = deposition::deposition_model_from_json(j.at("deposition"));
        if (j.contains("profilers")) {
            c.profilers.clear();
            int idx = 0;
            for (const auto& pj : j.at("profilers")) {
                VirtualProfiler p;
                p.id = pj.value("id", idx);
                p.mount = profiler_mount(vec3_from(pj.at("line_center_mm")), vec3_from(pj.at("lateral_axis")),
                                         pj.value("tilt_deg", 10.0), pj.value("standoff_mm", 100.0));
                p.points_per_frame = pj.value("points_per_frame", p.points_per_frame);
                p.fov_width = pj.value("fov_width_mm", p.fov_width);
                p.frame_rate = pj.value("frame_rate_hz", p.frame_rate);
                p.noise_sigma = pj.value("noise_sigma_mm", p.noise_sigma);
                p.trigger_offset_s = pj.value("trigger_offset_ms", 20.0 * idx) / 1000.0;
                c.profilers.push_back(p);
                ++idx;
            }
        }
        if (j.contains("noise_sigma_mm"))
            for (auto& p : c.profilers)
                p.noise_sigma = j.at("noise_sigma_mm").get<double>();
        if (j.contains("points_per_frame"))
            for (auto& p : c.profilers)
                p.points_per_frame = j.at("points_per_frame").get<int>();
        if (j.contains("occluder")) {
            const auto& o = j.at("occluder");
            c.occluder.enabled = o.value("enabled", true);
            c.occluder.radius = o.value("radius_mm", c.occluder.radius);
            c.occluder.standoff = o.value("standoff_mm", c.occluder.standoff);
            c.occluder.length = o.value("length_mm", c.occluder.length);
        }
        if (j.contains("patches"))
            for (const auto& pj : j.at("patches")) {
                deposition::RatePatch p;
                const auto xs = pj.at("x_mm").get<std::vector<double>>();
                const auto ys = pj.at("y_mm").get<std::vector<double>>();
                const auto ls = pj.at("layers").get<std::vector<int>>();
                if (xs.size() != 2 || ys.size() != 2 || ls.size() != 2)
                    throw ConfigError("patch ranges need two values");
                p.x_min = xs[0];
                p.x_max = xs[1];
                p.y_min = ys[0];
                p.y_max = ys[1];
                p.first_layer = ls[0];
                p.last_layer = ls[1];
                p.rate_scale = pj.at("rate_scale").get<double>();
                if (!(p.rate_scale >= 0.0) || p.x_min > p.x_max || p.y_min > p.y_max || p.first_layer > p.last_layer)
                    throw ConfigError("patch ranges must be ordered and rate_scale non-negative");
                c.patches.push_back(p);
            }
        c.cell = j.value("heightfield_cell_mm", c.cell);
        c.margin = j.value("margin_mm", c.margin);
        c.pose_rate = j.value("pose_rate_hz", c.pose_rate);
        c.step_sigmas = j.value("step_sigmas", c.step_sigmas);
        c.max_dt = j.value("max_dt_s", c.max_dt);
        c.seed = j.value("seed", c.seed);
        c.validate();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("simulation config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("simulation config: ") + e.what());
    }
    return c;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + p.string());
    return out;
}

std::int64_t to_us(double t) { return static_cast<std::int64_t>(std::llround(t * 1e6)); }

}  // namespace

SimulationResult run_simulation(const toolpath::Toolpath& path, const SimulationConfig& config,
                                const std::filesystem::path& out_dir)
{
    config.validate();
    if (path.empty())
        throw std::invalid_argument("simulation needs a non-empty toolpath");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    SimulationResult res;
    res.truth = HeightField::covering(path.bounds(), config.margin, config.cell);
    const double duration = path.total_duration();
    const std::int64_t end_us = to_us(duration);

    struct Event {
        std::int64_t t_us;
        std::size_t profiler;
    };
    std::vector<Event> events;
    for (std::size_t j = 0; j < config.profilers.size(); ++j) {
        const auto& p = config.profilers[j];
        for (std::int64_t k = 0;; ++k) {
            const std::int64_t t = to_us(static_cast<double>(k) / p.frame_rate + p.trigger_offset_s);
            if (t >= end_us)
                break;
            events.push_back({t, j});
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.t_us < b.t_us || (a.t_us == b.t_us && a.profiler < b.profiler);
    });

    std::vector<std::ofstream> scan_out;
    res.frames.assign(config.profilers.size(), 0);
    for (const auto& p : config.profilers) {
        res.scan_files.push_back(out_dir / ("scans_" + std::to_string(p.id) + ".jsonl"));
        scan_out.push_back(open_out(res.scan_files.back()));
    }

    std::mt19937_64 rng(config.seed);
    auto pose_at_us = [&](std::int64_t t_us) {
        const double t = std::min(static_cast<double>(t_us) * 1e-6, duration);
        return RigidTransform::translation(path.pose_at(t).position);
    };
    double cur = 0.0;
    for (const Event& e : events) {
        const double t = static_cast<double>(e.t_us) * 1e-6;
        if (t > cur) {
            res.zeta_time += deposition::deposit_interval(res.truth, config.model, path, cur, t, config.step_sigmas,
                                                          config.max_dt, config.patches);
            cur = t;
        }
        const auto& p = config.profilers[e.profiler];
        const auto frame = scan_frame(res.truth, p, pose_at_us(e.t_us), e.t_us, &rng, config.occluder);
        scan_out[e.profiler] << streams::format_frame(frame) << '\n';
        ++res.frames[e.profiler];
    }
    if (duration > cur)
        res.zeta_time += deposition::deposit_interval(res.truth, config.model, path, cur, duration,
                                                      config.step_sigmas, config.max_dt, config.patches);
    for (std::size_t j = 0; j < scan_out.size(); ++j)
        if (!scan_out[j].flush())
            throw IoError("failed writing " + res.scan_files[j].string());

    res.pose_file = out_dir / "poses.jsonl";
    {
        std::ofstream out = open_out(res.pose_file);
        const auto period = static_cast<std::int64_t>(std::llround(1e6 / config.pose_rate));
        for (std::int64_t t = 0;; t += period) {
            const std::int64_t tt = std::min(t, end_us);
            out << streams::format_pose({tt, pose_at_us(tt)}) << '\n';
            ++res.poses;
            if (tt >= end_us)
                break;
        }
        if (!out.flush())
            throw IoError("failed writing " + res.pose_file.string());
    }

    res.truth_file = out_dir / "truth.ply";
    mesh::write_ply(res.truth_file, heightfield_mesh(res.truth));

    res.calibration_file = out_dir / "calibration.json";
    geom::CalibrationSet calib;
    for (const auto& p : config.profilers)
        calib[p.id] = p.mount;
    geom::save_calibration(res.calibration_file, calib);

    res.deposited_volume = res.truth.volume();
    return res;
}

}  // namespace amfuse::scansim
