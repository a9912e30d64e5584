#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "skelscreen/bac.hpp"
#include "skelscreen/localize.hpp"
#include "skelscreen/taxonomy.hpp"

namespace skelscreen {

// A classified bone in the BAC frame; the unit the relabeling and
// screening stages operate on.
struct SkeletalBone {
    int bone_id = 0;
    int label = 0; // taxonomy index
    Eigen::Vector3d bac_centroid_mm = Eigen::Vector3d::Zero();
    std::int64_t n_voxels = 0;
    double major_axis_mm = 0.0;
};

// The five curve families of the relabeling stage. All vertebral-body
// subtypes share one curve.
enum class CurveGroup : uint8_t {
    vertebral_body = 0,
    arch_left = 1,
    arch_right = 2,
    rib_left = 3,
    rib_right = 4,
};

std::optional<CurveGroup> curve_group_of(BoneGroup g);

// Polynomial curves y(x), z(x) over the BAC primary axis; quadratic for
// ribs, quartic for vertebral bodies and arches. [x_min, x_max] is the
// span of the fitted points; distance queries clamp to it so the
// polynomial is never extrapolated far outside its support.
struct FittedCurve {
    CurveGroup group = CurveGroup::vertebral_body;
    int degree = 4;
    Eigen::VectorXd coeffs_y; // ascending powers, degree+1 entries
    Eigen::VectorXd coeffs_z;
    double x_min = -1e30;
    double x_max = 1e30;

    double eval_y(double x) const;
    double eval_z(double x) const;
    double distance(const Eigen::Vector3d& p) const; // in the (y,z) residual
};

// Caudal exclusion line through the head-side ends of the two ilia,
// parameterized as x(y). Points with x below the line are dropped from
// curve fitting. Inactive cutoffs keep everything.
struct CaudalCutoff {
    bool active = false;
    double x_a = 0.0, y_a = 0.0;
    double x_b = 0.0, y_b = 0.0;

    bool keep(double x, double y) const;
};

// Builds the cutoff from the ilium-group bones; each ilium's head-side end
// is its maximum-x voxel center in the BAC frame. Missing ilia deactivate
// the cutoff and append a warning.
CaudalCutoff compute_caudal_cutoff(const std::vector<SkeletalBone>& bones,
                                   const std::vector<BoneInstance>& instances,
                                   const BodyFrame& frame,
                                   const std::array<double, 3>& spacing_mm,
                                   const Taxonomy& taxonomy,
                                   std::vector<std::string>& warnings);

// Weighted polynomial least squares: minimizes sum w_i (p(x_i) - v_i)^2,
// returning degree+1 coefficients in ascending powers.
Eigen::VectorXd weighted_polyfit(const std::vector<double>& x,
                                 const std::vector<double>& v,
                                 const std::vector<double>& w, int degree);

// Weighted least-squares fit of y(x), z(x). Point weights are reciprocal
// mean distances to the 2 nearest same-group points (+1e-6 mm); after the
// first fit, points whose (y,z) residual exceeds the residual standard
// deviation are dropped and the curve refit once. Returns nothing (and
// warns) when fewer than degree+1 points are available.
std::optional<FittedCurve> fit_group_curve(
    const std::vector<Eigen::Vector3d>& points, CurveGroup group, int degree,
    std::vector<std::string>& warnings);

struct RelabelDiff {
    int bone_id = 0;
    int old_label = 0;
    int new_label = 0;
    double distance_mm = 0.0;
};

// Reassigns every bone whose group belongs to a curve family to the group
// of its nearest fitted curve; bones outside the five families are never
// touched. The concrete label inside the target group is taken from the
// nearest-in-x bone that already carried that group before the pass (or
// the group's first taxonomy label).
std::vector<RelabelDiff> relabel_by_curves(std::vector<SkeletalBone>& bones,
                                           const std::vector<FittedCurve>& curves,
                                           const Taxonomy& taxonomy);

struct RelabelParams {
    bool rib_side_from_geometry = true; // resolve rib side by sign of y
};

struct RelabelResult {
    std::vector<RelabelDiff> diffs;
    std::vector<FittedCurve> curves;
    std::vector<std::string> warnings;
};

// Full relabeling pass for one fetus: geometric rib-side correction,
// caudal cutoff, per-group curve fits, nearest-curve reassignment.
RelabelResult relabel_fetus(std::vector<SkeletalBone>& bones,
                            const std::vector<BoneInstance>& instances,
                            const BodyFrame& frame,
                            const std::array<double, 3>& spacing_mm,
                            const Taxonomy& taxonomy,
                            const RelabelParams& params = RelabelParams{});

void write_relabel_csv(const std::vector<RelabelDiff>& diffs,
                       const Taxonomy& taxonomy,
                       const std::filesystem::path& path);

} // namespace skelscreen
