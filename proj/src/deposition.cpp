#include "amfuse/deposition.hpp"

#include "amfuse/error.hpp"
#include "amfuse/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace amfuse::deposition {

ZetaCurve ZetaCurve::cosine_power(double p)
{
    if (!(p >= 0.0) || !std::isfinite(p))
        throw std::invalid_argument("zeta: cosine power must be finite and non-negative");
    ZetaCurve z;
    z.power_ = p;
    return z;
}

ZetaCurve ZetaCurve::table(std::vector<std::pair<double, double>> points)
{
    if (points.empty() || points.front().first != 0.0 || points.front().second != 1.0)
        throw std::invalid_argument("zeta table must start at (0 deg, 1)");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [deg, v] = points[i];
        if (!(deg >= 0.0 && deg <= 90.0) || !(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("zeta table entries must lie in [0,90] x [0,1]");
        if (i > 0 && !(deg > points[i - 1].first))
            throw std::invalid_argument("zeta table angles must be strictly increasing");
        if (i > 0 && v > points[i - 1].second)
            throw std::invalid_argument("zeta table must be non-increasing");
    }
    ZetaCurve z;
    z.table_ = std::move(points);
    return z;
}

double ZetaCurve::operator()(double theta_deg) const
{
    const double th = std::clamp(theta_deg, 0.0, 90.0);
    if (table_.empty()) {
        const double c = std::cos(th * std::numbers::pi / 180.0);
        return std::pow(std::max(c, 0.0), power_);
    }
    if (th >= table_.back().first)
        return table_.back().second;
    auto hi = std::upper_bound(table_.begin(), table_.end(), th,
                               [](double v, const std::pair<double, double>& p) { return v < p.first; });
    auto lo = hi - 1;
    const double f = (th - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
}

void DepositionModel::validate() const
{
    if (!(amplitude > 0.0) || !std::isfinite(amplitude))
        throw std::invalid_argument("deposition amplitude A must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("deposition sigma must be positive");
    if (!(cutoff_sigmas > 0.0))
        throw std::invalid_argument("deposition cutoff must be positive");
}

DepositionModel deposition_model_from_json(const nlohmann::json& j)
{
    DepositionModel m;
    try {
        m.amplitude = j.value("A_mm_per_s", m.amplitude);
        m.sigma = j.value("sigma_mm", m.sigma);
        m.cutoff_sigmas = j.value("cutoff_sigmas", m.cutoff_sigmas);
        if (j.contains("zeta")) {
            const auto& z = j.at("zeta");
            if (z.is_object())
                m.zeta = ZetaCurve::cosine_power(z.at("cos_power").get<double>());
            else
                m.zeta = ZetaCurve::table(z.get<std::vector<std::pair<double, double>>>());
        }
        m.validate();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("deposition model: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("deposition model: ") + e.what());
    }
    return m;
}

nlohmann::json to_json(const DepositionModel& m)
{
    nlohmann::json j{{"A_mm_per_s", m.amplitude}, {"sigma_mm", m.sigma}, {"cutoff_sigmas", m.cutoff_sigmas}};
    if (m.zeta.is_power_law())
        j["zeta"] = {{"cos_power", m.zeta.power()}};
    else
        j["zeta"] = m.zeta.points();
    return j;
}

HeightField::HeightField(double origin_x, double origin_y, double cell, std::size_t nx, std::size_t ny)
    : x0_(origin_x), y0_(origin_y), cell_(cell), nx_(nx), ny_(ny), h_(nx * ny, 0.0)
{
    if (!(cell > 0.0))
        throw std::invalid_argument("heightfield cell size must be positive");
}

HeightField HeightField::covering(const geom::Aabb& box, double margin, double cell)
{
    const double x0 = std::floor((box.min.x - margin) / cell) * cell;
    const double y0 = std::floor((box.min.y - margin) / cell) * cell;
    const auto nx = static_cast<std::size_t>(std::ceil((box.max.x + margin - x0) / cell));
    const auto ny = static_cast<std::size_t>(std::ceil((box.max.y + margin - y0) / cell));
    return {x0, y0, cell, std::max<std::size_t>(nx, 2), std::max<std::size_t>(ny, 2)};
}

bool HeightField::contains(double x, double y) const
{
    return x >= x0_ && y >= y0_ && x <= x0_ + static_cast<double>(nx_) * cell_ &&
           y <= y0_ + static_cast<double>(ny_) * cell_;
}

double HeightField::sample(double x, double y) const
{
    const double fx = std::clamp((x - x0_) / cell_ - 0.5, 0.0, static_cast<double>(nx_ - 1));
    const double fy = std::clamp((y - y0_) / cell_ - 0.5, 0.0, static_cast<double>(ny_ - 1));
    const auto i0 = std::min(static_cast<std::size_t>(fx), nx_ - 2);
    const auto j0 = std::min(static_cast<std::size_t>(fy), ny_ - 2);
    const double u = fx - static_cast<double>(i0);
    const double v = fy - static_cast<double>(j0);
    const double h00 = at(i0, j0), h10 = at(i0 + 1, j0), h01 = at(i0, j0 + 1), h11 = at(i0 + 1, j0 + 1);
    return (1 - v) * ((1 - u) * h00 + u * h10) + v * ((1 - u) * h01 + u * h11);
}

double HeightField::max_height() const
{
    return h_.empty() ? 0.0 : *std::max_element(h_.begin(), h_.end());
}

double HeightField::volume() const
{
    double s = 0.0;
    for (double v : h_)
        s += v;
    return s * cell_ * cell_;
}

void deposit_step(HeightField& field, const DepositionModel& model, const Point3& nozzle, double tilt_deg, double dt,
                  double rate_scale)
{
    if (!(dt > 0.0))
        return;
    const double gain = rate_scale * model.zeta(tilt_deg) * model.amplitude * dt;
    if (gain == 0.0)
        return;
    const double radius = model.cutoff_radius();
    const double inv2s2 = 1.0 / (2.0 * model.sigma * model.sigma);
    const double c = field.cell();
    const auto clamp_index = [](double v, std::size_t n) {
        return static_cast<std::ptrdiff_t>(std::clamp(v, 0.0, static_cast<double>(n)));
    };
    const std::ptrdiff_t i_lo = clamp_index(std::floor((nozzle.x - radius - field.origin_x()) / c), field.nx());
    const std::ptrdiff_t i_hi = clamp_index(std::ceil((nozzle.x + radius - field.origin_x()) / c), field.nx());
    const std::ptrdiff_t j_lo = clamp_index(std::floor((nozzle.y - radius - field.origin_y()) / c), field.ny());
    const std::ptrdiff_t j_hi = clamp_index(std::ceil((nozzle.y + radius - field.origin_y()) / c), field.ny());
    if (i_lo >= i_hi || j_lo >= j_hi)
        return;

    // exp(-(dx^2 + dy^2) k) = exp(-dx^2 k) * exp(-dy^2 k): one row of column
    // factors, then an axpy per row restricted to the cutoff disc.
    std::vector<double> gx(static_cast<std::size_t>(i_hi - i_lo));
    for (std::ptrdiff_t i = i_lo; i < i_hi; ++i) {
        const double dx = field.center_x(static_cast<std::size_t>(i)) - nozzle.x;
        gx[static_cast<std::size_t>(i - i_lo)] = std::exp(-dx * dx * inv2s2);
    }
    const double r2 = radius * radius;
    for (std::ptrdiff_t j = j_lo; j < j_hi; ++j) {
        const double dy = field.center_y(static_cast<std::size_t>(j)) - nozzle.y;
        const double rem = r2 - dy * dy;
        if (rem < 0.0)
            continue;
        const double half = std::sqrt(rem);
        // Columns whose centre lies within [x - half, x + half].
        const double first = std::ceil((nozzle.x - half - field.origin_x()) / c - 0.5);
        const double last = std::floor((nozzle.x + half - field.origin_x()) / c - 0.5);
        const std::ptrdiff_t a = std::max<std::ptrdiff_t>(i_lo, static_cast<std::ptrdiff_t>(first));
        const std::ptrdiff_t b = std::min<std::ptrdiff_t>(i_hi - 1, static_cast<std::ptrdiff_t>(last));
        if (a > b)
            continue;
        const double row_gain = gain * std::exp(-dy * dy * inv2s2);
        auto row = field.row(static_cast<std::size_t>(j));
        simd::axpy(row_gain, std::span<const double>(gx).subspan(static_cast<std::size_t>(a - i_lo), static_cast<std::size_t>(b - a + 1)),
                   row.subspan(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a + 1)));
    }
}

double rate_scale_at(std::span<const RatePatch> patches, const Point3& center, int layer)
{
    double s = 1.0;
    for (const RatePatch& p : patches)
        if (p.applies(center, layer))
            s *= p.rate_scale;
    return s;
}

double deposit_interval(HeightField& field, const DepositionModel& model, const toolpath::Toolpath& tp, double t0,
                        double t1, double step_sigmas, double max_dt, std::span<const RatePatch> patches)
{
    if (tp.empty() || !(t1 > t0))
        return 0.0;
    t0 = std::max(t0, 0.0);
    t1 = std::min(t1, tp.total_duration());
    double applied = 0.0;
    const std::size_t first = tp.segment_at(t0);
    for (std::size_t i = first; i < tp.size(); ++i) {
        const double ts = tp.segment_start_time(i);
        if (ts >= t1)
            break;
        const toolpath::Segment& s = tp.segments()[i];
        const double travel = tp.travel_time(i);
        const double zeta = model.zeta(s.tilt_deg);

        // Moving part.
        const double a = std::max(t0, ts);
        const double b = std::min(t1, ts + travel);
        if (b > a) {
            const double dt_max = std::min(max_dt, step_sigmas * model.sigma / s.speed);
            const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / dt_max - 1e-9)));
            const double h = (b - a) / static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double tm = a + (static_cast<double>(k) + 0.5) * h;
                const Point3 p = s.start + (s.end - s.start) * ((tm - ts) / travel);
                const double scale = rate_scale_at(patches, p, s.layer);
                deposit_step(field, model, p, s.tilt_deg, h, scale);
                applied += zeta * scale * h;
            }
        }
        // Dwell at the segment end.
        const double da = std::max(t0, ts + travel);
        const double db = std::min(t1, tp.segment_end_time(i));
        if (db > da) {
            const double scale = rate_scale_at(patches, s.end, s.layer);
            deposit_step(field, model, s.end, s.tilt_deg, db - da, scale);
            applied += zeta * scale * (db - da);
        }
    }
    return applied;
}

}  // namespace amfuse::deposition
