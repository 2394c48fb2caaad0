#pragma once

// Gaussian spray-plume deposition shared by the simulator (ground truth)
// and the near-net reference model.

#include "amfuse/geomcore.hpp"
#include "amfuse/toolpath.hpp"

#include <json.hpp>

#include <span>
#include <utility>
#include <vector>

namespace amfuse::deposition {

using geom::Point3;

/// Deposition efficiency as a function of spray angle, zeta(0) = 1,
/// non-increasing on [0, 90] degrees. Either a cosine power law or a
/// piecewise-linear table.
class ZetaCurve {
public:
    /// cos^p(theta); p >= 0.
    static ZetaCurve cosine_power(double p);
    /// Throws std::invalid_argument unless the table starts at 0 deg with
    /// value 1, has strictly increasing angles within [0, 90], values in
    /// [0, 1] and is non-increasing.
    static ZetaCurve table(std::vector<std::pair<double, double>> points);

    double operator()(double theta_deg) const;

    bool is_power_law() const { return table_.empty(); }
    double power() const { return power_; }
    const std::vector<std::pair<double, double>>& points() const { return table_; }

private:
    double power_ = 2.0;
    std::vector<std::pair<double, double>> table_;
};

struct DepositionModel {
    double amplitude = 0.8488263631567751; // A: peak growth rate at plume centre, mm/s
    double sigma = 3.0;                    // plume standard deviation, mm
    ZetaCurve zeta = ZetaCurve::cosine_power(2.0);
    double cutoff_sigmas = 4.0;            // cells beyond cutoff_sigmas * sigma receive nothing

    /// Throws std::invalid_argument on non-positive A, sigma or cutoff.
    void validate() const;
    double cutoff_radius() const { return cutoff_sigmas * sigma; }
};

/// {"A_mm_per_s": .., "sigma_mm": .., "zeta": [[deg, value], ...]} or
/// "zeta": {"cos_power": p}. Optional "cutoff_sigmas".
DepositionModel deposition_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DepositionModel& m);

/// Regular XY grid of accumulated height over the substrate. Cell (i, j)
/// covers [x0 + i*c, x0 + (i+1)*c) x [y0 + j*c, y0 + (j+1)*c); its value is
/// the height at the cell centre.
class HeightField {
public:
    HeightField() = default;
    HeightField(double origin_x, double origin_y, double cell, std::size_t nx, std::size_t ny);

    /// Grid covering `box` (XY) grown by `margin` on every side.
    static HeightField covering(const geom::Aabb& box, double margin, double cell);

    double origin_x() const { return x0_; }
    double origin_y() const { return y0_; }
    double cell() const { return cell_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }

    double center_x(std::size_t i) const { return x0_ + (static_cast<double>(i) + 0.5) * cell_; }
    double center_y(std::size_t j) const { return y0_ + (static_cast<double>(j) + 0.5) * cell_; }

    double& at(std::size_t i, std::size_t j) { return h_[j * nx_ + i]; }
    double at(std::size_t i, std::size_t j) const { return h_[j * nx_ + i]; }
    std::span<double> row(std::size_t j) { return {h_.data() + j * nx_, nx_}; }
    std::span<const double> values() const { return h_; }
    std::span<double> values() { return h_; }

    bool contains(double x, double y) const;
    /// Bilinear interpolation between cell centres, clamped at the border.
    double sample(double x, double y) const;
    double max_height() const;
    /// Sum of height * cell area (mm^3).
    double volume() const;

private:
    double x0_ = 0.0;
    double y0_ = 0.0;
    double cell_ = 0.5;
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
    std::vector<double> h_;
};

/// Adds one time step of plume deposit centred at `nozzle` (XY used):
/// every cell within the cutoff radius gains
///     rate_scale * zeta(tilt) * A * exp(-r^2 / (2 sigma^2)) * dt.
void deposit_step(HeightField& field, const DepositionModel& model, const Point3& nozzle, double tilt_deg, double dt,
                  double rate_scale = 1.0);

/// Rectangular region whose deposition rate is scaled while the plume
/// centre is inside it and the active toolpath layer is within range. Used
/// to plant over/under-build defects in simulation.
struct RatePatch {
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    int first_layer = 0;
    int last_layer = 0;
    double rate_scale = 1.0;

    bool applies(const Point3& center, int layer) const
    {
        return layer >= first_layer && layer <= last_layer && center.x >= x_min && center.x <= x_max &&
               center.y >= y_min && center.y <= y_max;
    }
};

double rate_scale_at(std::span<const RatePatch> patches, const Point3& center, int layer);

/// Time quadrature of the moving plume over the toolpath interval
/// [t0, t1]: midpoint rule per segment, with steps no longer than
/// `step_sigmas * sigma` of travel (and no longer than `max_dt`). Returns
/// the integrated spray-on time weighted by zeta, i.e. the integral of
/// zeta(theta(t)) dt actually applied.
double deposit_interval(HeightField& field, const DepositionModel& model, const toolpath::Toolpath& tp, double t0,
                        double t1, double step_sigmas = 0.5, double max_dt = 0.05,
                        std::span<const RatePatch> patches = {});

}  // namespace amfuse::deposition
