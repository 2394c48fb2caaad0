#include "amfuse/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amfuse::reference {

void ReferenceOptions::validate() const
{
    if (!(voxel_size > 0.0) || !(truncation >= voxel_size) || !(cell > 0.0) || !(roi_margin >= 0.0) ||
        !(layer_thickness > 0.0) || !(step_sigmas > 0.0) || !(max_dt > 0.0))
        throw std::invalid_argument("reference options: sizes must be positive and truncation >= voxel size");
}

geom::Aabb reference_roi(const toolpath::Toolpath& tp, double margin)
{
    geom::Aabb b = tp.bounds();
    b.min.x -= margin;
    b.min.y -= margin;
    b.max.x += margin;
    b.max.y += margin;
    return b;
}

fusion::GridView vertical_tsdf(const deposition::HeightField& h, const geom::Aabb& roi, double voxel_size,
                               double truncation)
{
    fusion::FusionParams p;
    p.voxel_size = voxel_size;
    p.truncation = truncation;
    fusion::SparseTsdfGrid grid(p);
    const auto lo = grid.key_of({roi.min.x, roi.min.y, 0.0});
    const auto hi = grid.key_of({roi.max.x, roi.max.y, 0.0});
    for (std::int32_t ky = lo.y - 1; ky <= hi.y + 1; ++ky)
        for (std::int32_t kx = lo.x - 1; kx <= hi.x + 1; ++kx) {
            const double x = kx * voxel_size, y = ky * voxel_size;
            const double s = h.sample(x, y);
            const double e = h.cell();
            const double gx = (h.sample(x + e, y) - h.sample(x - e, y)) / (2.0 * e);
            const double gy = (h.sample(x, y + e) - h.sample(x, y - e)) / (2.0 * e);
            const double slope = 1.0 / std::sqrt(1.0 + gx * gx + gy * gy);
            const auto z0 = static_cast<std::int32_t>(std::ceil((s - truncation) / voxel_size));
            const auto z1 = static_cast<std::int32_t>(std::floor((s + truncation) / voxel_size));
            for (std::int32_t kz = z0; kz <= z1; ++kz) {
                const double d = std::clamp((kz * voxel_size - s) * slope, -truncation, truncation);
                grid.assign({kx, ky, kz}, {d, 1.0});
            }
        }
    return grid.snapshot();
}

ReferenceBuilder::ReferenceBuilder(toolpath::Toolpath tp, deposition::DepositionModel model, ReferenceOptions opts)
    : tp_(std::move(tp)), model_(std::move(model)), opts_(opts)
{
    opts_.validate();
    model_.validate();
    if (tp_.empty())
        throw std::invalid_argument("reference needs a non-empty toolpath");
    layers_ = toolpath::segment_layers(tp_, opts_.layer_thickness);
    roi_ = reference_roi(tp_, opts_.roi_margin);
    field_ = deposition::HeightField::covering(roi_, 2.0 * opts_.voxel_size, opts_.cell);
}

ReferenceModel ReferenceBuilder::at_time(double T, int layer_label)
{
    if (!(T >= 0.0) || T > tp_.total_duration())
        throw std::out_of_range("reference time outside the toolpath");
    if (T < t_)
        throw std::invalid_argument("reference builder cannot go back in time");
    if (T > t_)
        zeta_time_ += deposition::deposit_interval(field_, model_, tp_, t_, T, opts_.step_sigmas, opts_.max_dt);
    t_ = T;
    ReferenceModel m;
    m.layer = layer_label;
    m.time = T;
    m.zeta_time = zeta_time_;
    m.roi = roi_;
    m.height = field_;
    m.grid = vertical_tsdf(field_, roi_, opts_.voxel_size, opts_.truncation);
    return m;
}

ReferenceModel ReferenceBuilder::at_layer(int k)
{
    if (k < 0 || static_cast<std::size_t>(k) >= layers_.size())
        throw std::out_of_range("reference layer " + std::to_string(k) + " outside the toolpath");
    return at_time(layers_[static_cast<std::size_t>(k)].t_end, k);
}

ReferenceModel build_reference(const toolpath::Toolpath& tp, const deposition::DepositionModel& model, int upto_layer,
                               const ReferenceOptions& opts)
{
    return ReferenceBuilder(tp, model, opts).at_layer(upto_layer);
}

ReferenceModel build_reference_at(const toolpath::Toolpath& tp, const deposition::DepositionModel& model, double T,
                                  const ReferenceOptions& opts)
{
    return ReferenceBuilder(tp, model, opts).at_time(T);
}

mesh::TriangleMesh reference_mesh(const ReferenceModel& ref)
{
    if (ref.empty())
        throw std::invalid_argument("reference model is empty");
    return mesh::marching_cubes(ref.grid);
}

}  // namespace amfuse::reference
