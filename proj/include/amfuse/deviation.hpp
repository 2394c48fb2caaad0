#pragma once

// Deviation of a scanned mesh against the near-net reference, global and
// curvature-gated local classification, and defect segmentation.

#include "amfuse/fusion.hpp"
#include "amfuse/meshing.hpp"
#include "amfuse/reference.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace amfuse::deviation {

using geom::Point3;

enum class DeviationClass : std::uint8_t { normal, overbuild, underbuild, local_over, local_under };

std::string_view to_string(DeviationClass c);
std::optional<DeviationClass> class_from_string(std::string_view s);

struct DeviationParams {
    double delta_g = 1.0; // global tolerance, mm
    double delta_l = 0.5; // local threshold on the normalised metric, (0, 1]
    double a_min = 10.0;  // smallest reported region, mm^2

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Signed distance to the reference surface, positive outside the
/// reference material. Uses the reference field where all 8 surrounding
/// voxels are observed and |D| is inside the band, and the exact mesh
/// distance elsewhere.
class ReferenceQuery {
public:
    ReferenceQuery(fusion::GridView grid, const mesh::TriangleMesh& surface);

    double operator()(const Point3& p) const;
    /// Counts how many queries fell back to the mesh.
    std::size_t fallbacks() const { return fallbacks_; }

private:
    fusion::GridView grid_;
    std::unique_ptr<mesh::MeshDistance> surface_;
    mutable std::size_t fallbacks_ = 0;
};

struct DeviationMap {
    mesh::TriangleMesh mesh;           // scanned mesh
    std::vector<double> d;             // signed deviation per vertex, mm
    std::vector<double> curvature;     // mean curvature per vertex, 1/mm
    std::vector<bool> curvature_valid; // false on rims and non-manifold vertices
    std::vector<double> metric;        // normalised local metric, [-1, 1]
    std::vector<DeviationClass> cls;
};

/// Throws std::invalid_argument for empty meshes.
DeviationMap compute_deviation(const mesh::TriangleMesh& scanned, const ReferenceQuery& ref);
DeviationMap compute_deviation(const mesh::TriangleMesh& scanned, const reference::ReferenceModel& ref);

/// Global classes by |d| > delta_g. The remaining vertices with a valid
/// curvature get m = |H| d / max |H d| (maximum over those vertices) and
/// are local_over / local_under when |m| > delta_l.
void classify(DeviationMap& map, double delta_g, double delta_l);

struct DefectRegion {
    int id = 0;
    DeviationClass cls = DeviationClass::normal;
    std::vector<std::uint32_t> vertices;
    double area = 0.0;   // mm^2
    geom::Aabb bbox;
    double height = 0.0; // bbox z extent, mm
    double peak = 0.0;   // max |d|, mm
    Point3 centroid{};   // area weighted
    int layer = 0;
};

/// Edge-connected single-class groups of non-normal vertices with area
/// above a_min, ordered by class then bounding box so the result does not
/// depend on vertex numbering. Ids are 0.. in that order.
std::vector<DefectRegion> segment(const DeviationMap& map, double a_min, int layer = 0);

struct DeviationSummary {
    std::size_t vertices = 0;
    double mean = 0.0;
    double mean_abs = 0.0;
    double rms = 0.0;
    double max_abs = 0.0;
};
DeviationSummary summarize(const std::vector<double>& d);

/// Scanned mesh with `scalar_deviation` and class colours: red ramp for
/// overbuild, blue ramp for underbuild, orange to purple for local classes.
mesh::TriangleMesh deviation_mesh(const DeviationMap& map, double delta_g);
mesh::Rgb class_color(DeviationClass c, double d, double metric, double delta_g);

/// Triangles with all three vertices inside the XY footprint of `roi`;
/// unused vertices are dropped.
mesh::TriangleMesh crop_xy(const mesh::TriangleMesh& m, const geom::Aabb& roi);

}  // namespace amfuse::deviation
