#pragma once

// Near-net reference: the deposition plume integrated over the executed
// toolpath, turned into a distance field and mesh with the same voxel
// layout as the fused scan.

#include "amfuse/deposition.hpp"
#include "amfuse/fusion.hpp"
#include "amfuse/meshing.hpp"
#include "amfuse/toolpath.hpp"

#include <vector>

namespace amfuse::reference {

struct ReferenceOptions {
    double voxel_size = 2.0;      // mm, same as fusion
    double truncation = 6.0;      // mm
    double cell = 0.5;            // heightfield cell, mm
    double roi_margin = 12.0;     // XY margin around the toolpath bounds, mm
    double layer_thickness = 0.8; // mm, for layer lookup
    double step_sigmas = 0.5;     // quadrature step bound
    double max_dt = 0.05;         // s

    void validate() const;
};

struct ReferenceModel {
    int layer = -1;        // -1 when built up to a time rather than a layer
    double time = 0.0;     // toolpath time covered, s
    double zeta_time = 0.0; // integral of zeta over the covered spray time, s
    geom::Aabb roi;        // XY region of interest (z unused)
    deposition::HeightField height;
    fusion::GridView grid;

    bool empty() const { return !(zeta_time > 0.0); }
};

/// Toolpath XY bounds grown by `margin`.
geom::Aabb reference_roi(const toolpath::Toolpath& tp, double margin);

/// Distance field from vertical offsets, D = clamp((z - h) / sqrt(1 + |grad h|^2),
/// -delta, delta), for every voxel with |z - h| <= delta whose column lies
/// within `roi` grown by one voxel. The slope factor turns the vertical
/// offset into the first-order distance to the surface.
fusion::GridView vertical_tsdf(const deposition::HeightField& h, const geom::Aabb& roi, double voxel_size,
                               double truncation);

/// Incremental construction for a streaming consumer: successive requests
/// must not go back in time.
class ReferenceBuilder {
public:
    ReferenceBuilder(toolpath::Toolpath tp, deposition::DepositionModel model, ReferenceOptions opts = {});

    const std::vector<toolpath::Layer>& layers() const { return layers_; }
    const geom::Aabb& roi() const { return roi_; }

    /// Throws std::out_of_range for T outside [0, duration] and
    /// std::invalid_argument for T earlier than the previous request.
    ReferenceModel at_time(double T, int layer_label = -1);
    /// Up to the end of toolpath layer k. Throws std::out_of_range.
    ReferenceModel at_layer(int k);

private:
    toolpath::Toolpath tp_;
    deposition::DepositionModel model_;
    ReferenceOptions opts_;
    std::vector<toolpath::Layer> layers_;
    geom::Aabb roi_;
    deposition::HeightField field_;
    double t_ = 0.0;
    double zeta_time_ = 0.0;
};

ReferenceModel build_reference(const toolpath::Toolpath& tp, const deposition::DepositionModel& model, int upto_layer,
                               const ReferenceOptions& opts = {});
ReferenceModel build_reference_at(const toolpath::Toolpath& tp, const deposition::DepositionModel& model, double T,
                                  const ReferenceOptions& opts = {});

/// Marching-cubes mesh of the reference field. Throws
/// std::invalid_argument for an empty model.
mesh::TriangleMesh reference_mesh(const ReferenceModel& ref);

}  // namespace amfuse::reference
