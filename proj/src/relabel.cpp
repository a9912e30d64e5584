#include "skelscreen/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "skelscreen/errors.hpp"

namespace skelscreen {

std::optional<CurveGroup> curve_group_of(BoneGroup g) {
    switch (g) {
        case BoneGroup::vertebral_body_cervical:
        case BoneGroup::vertebral_body_thoracic:
        case BoneGroup::vertebral_body_lumbar:
            return CurveGroup::vertebral_body;
        case BoneGroup::vertebral_arch_left: return CurveGroup::arch_left;
        case BoneGroup::vertebral_arch_right: return CurveGroup::arch_right;
        case BoneGroup::rib_left: return CurveGroup::rib_left;
        case BoneGroup::rib_right: return CurveGroup::rib_right;
        default: return std::nullopt;
    }
}

namespace {

double eval_poly(const Eigen::VectorXd& coeffs, double x) {
    double acc = 0.0;
    for (int i = static_cast<int>(coeffs.size()) - 1; i >= 0; --i) {
        acc = acc * x + coeffs[i];
    }
    return acc;
}

BoneGroup representative_group(CurveGroup g) {
    switch (g) {
        case CurveGroup::vertebral_body:
            return BoneGroup::vertebral_body_thoracic;
        case CurveGroup::arch_left: return BoneGroup::vertebral_arch_left;
        case CurveGroup::arch_right: return BoneGroup::vertebral_arch_right;
        case CurveGroup::rib_left: return BoneGroup::rib_left;
        case CurveGroup::rib_right: return BoneGroup::rib_right;
    }
    throw Error(ErrorCode::bad_value, "unknown curve group");
}

} // namespace

double FittedCurve::eval_y(double x) const { return eval_poly(coeffs_y, x); }
double FittedCurve::eval_z(double x) const { return eval_poly(coeffs_z, x); }

double FittedCurve::distance(const Eigen::Vector3d& p) const {
    const double x = std::clamp(p.x(), x_min, x_max);
    const double dy = p.y() - eval_y(x);
    const double dz = p.z() - eval_z(x);
    return std::sqrt(dy * dy + dz * dz);
}

bool CaudalCutoff::keep(double x, double y) const {
    if (!active) return true;
    double x_line;
    if (y_a == y_b) {
        x_line = 0.5 * (x_a + x_b);
    } else {
        const double t = (y - y_a) / (y_b - y_a);
        x_line = x_a + t * (x_b - x_a);
    }
    return x >= x_line;
}

CaudalCutoff compute_caudal_cutoff(const std::vector<SkeletalBone>& bones,
                                   const std::vector<BoneInstance>& instances,
                                   const BodyFrame& frame,
                                   const std::array<double, 3>& spacing_mm,
                                   const Taxonomy& taxonomy,
                                   std::vector<std::string>& warnings) {
    std::vector<const SkeletalBone*> ilia;
    for (const SkeletalBone& b : bones) {
        if (taxonomy.group_of(b.label) == BoneGroup::ilium) {
            ilia.push_back(&b);
        }
    }
    if (ilia.size() < 2) {
        warnings.push_back("caudal cutoff inactive: bilateral ilia not found");
        return CaudalCutoff{};
    }
    if (ilia.size() > 2) {
        // Keep the two largest candidates; extra ilium labels are
        // classifier noise.
        std::sort(ilia.begin(), ilia.end(),
                  [](const SkeletalBone* a, const SkeletalBone* b) {
                      if (a->n_voxels != b->n_voxels)
                          return a->n_voxels > b->n_voxels;
                      return a->bone_id < b->bone_id;
                  });
        warnings.push_back("caudal cutoff: more than 2 ilium bones, using "
                           "the two largest");
        ilia.resize(2);
    }

    auto head_end = [&](const SkeletalBone& bone) {
        const BoneInstance* inst = nullptr;
        for (const BoneInstance& c : instances) {
            if (c.id == bone.bone_id) {
                inst = &c;
                break;
            }
        }
        Eigen::Vector3d best = bone.bac_centroid_mm;
        if (inst != nullptr) {
            double best_x = -std::numeric_limits<double>::infinity();
            for (const GridCoord& c : inst->voxels) {
                const Eigen::Vector3d p = frame.apply(
                    Eigen::Vector3d((c.x + 0.5) * spacing_mm[0],
                                    (c.y + 0.5) * spacing_mm[1],
                                    (c.z + 0.5) * spacing_mm[2]));
                if (p.x() > best_x) {
                    best_x = p.x();
                    best = p;
                }
            }
        }
        return best;
    };

    const Eigen::Vector3d ea = head_end(*ilia[0]);
    const Eigen::Vector3d eb = head_end(*ilia[1]);
    CaudalCutoff cutoff;
    cutoff.active = true;
    cutoff.x_a = ea.x();
    cutoff.y_a = ea.y();
    cutoff.x_b = eb.x();
    cutoff.y_b = eb.y();
    return cutoff;
}

Eigen::VectorXd weighted_polyfit(const std::vector<double>& x,
                                 const std::vector<double>& v,
                                 const std::vector<double>& w, int degree) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        const double sw = std::sqrt(w[i]);
        double pow_x = 1.0;
        for (int j = 0; j <= degree; ++j) {
            a(i, j) = sw * pow_x;
            pow_x *= x[i];
        }
        b[i] = sw * v[i];
    }
    return a.colPivHouseholderQr().solve(b);
}

namespace {

std::vector<double> reciprocal_neighbor_weights(
    const std::vector<Eigen::Vector3d>& pts) {
    constexpr double kEps = 1e-6; // mm, guards coincident centroids
    const size_t n = pts.size();
    std::vector<double> w(n);
    std::vector<double> d;
    for (size_t i = 0; i < n; ++i) {
        d.clear();
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            d.push_back((pts[i] - pts[j]).norm());
        }
        std::sort(d.begin(), d.end());
        const size_t take = std::min<size_t>(2, d.size());
        double mean = 0.0;
        for (size_t k = 0; k < take; ++k) mean += d[k];
        mean /= static_cast<double>(take);
        w[i] = 1.0 / (mean + kEps);
    }
    return w;
}

FittedCurve fit_once(const std::vector<Eigen::Vector3d>& pts,
                     CurveGroup group, int degree) {
    const std::vector<double> w = reciprocal_neighbor_weights(pts);
    std::vector<double> x(pts.size()), y(pts.size()), z(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        x[i] = pts[i].x();
        y[i] = pts[i].y();
        z[i] = pts[i].z();
    }
    FittedCurve c;
    c.group = group;
    c.degree = degree;
    c.coeffs_y = weighted_polyfit(x, y, w, degree);
    c.coeffs_z = weighted_polyfit(x, z, w, degree);
    c.x_min = *std::min_element(x.begin(), x.end());
    c.x_max = *std::max_element(x.begin(), x.end());
    return c;
}

} // namespace

std::optional<FittedCurve> fit_group_curve(
    const std::vector<Eigen::Vector3d>& points, CurveGroup group, int degree,
    std::vector<std::string>& warnings) {
    const int need = degree + 1;
    if (static_cast<int>(points.size()) < need) {
        warnings.push_back("curve fit skipped for group " +
                           group_name(representative_group(group)) + ": " +
                           std::to_string(points.size()) + " points < " +
                           std::to_string(need));
        return std::nullopt;
    }

    FittedCurve first = fit_once(points, group, degree);

    // One exclude-and-refit pass on the residual rule.
    std::vector<double> residuals(points.size());
    double mean = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        residuals[i] = first.distance(points[i]);
        mean += residuals[i];
    }
    mean /= static_cast<double>(points.size());
    double var = 0.0;
    for (double r : residuals) var += (r - mean) * (r - mean);
    const double stddev = std::sqrt(var / static_cast<double>(points.size()));

    std::vector<Eigen::Vector3d> kept;
    for (size_t i = 0; i < points.size(); ++i) {
        if (residuals[i] <= stddev) kept.push_back(points[i]);
    }
    if (kept.size() == points.size() ||
        static_cast<int>(kept.size()) < need) {
        return first;
    }
    return fit_once(kept, group, degree);
}

std::vector<RelabelDiff> relabel_by_curves(
    std::vector<SkeletalBone>& bones, const std::vector<FittedCurve>& curves,
    const Taxonomy& taxonomy) {
    std::vector<RelabelDiff> diffs;
    if (curves.empty()) return diffs;

    // Labels are resolved against the pre-pass state so the operation is
    // order-independent and idempotent.
    const std::vector<SkeletalBone> before = bones;

    auto label_for_group = [&](CurveGroup target, const SkeletalBone& bone) {
        int best_label = -1;
        double best_dx = std::numeric_limits<double>::infinity();
        for (const SkeletalBone& other : before) {
            if (other.bone_id == bone.bone_id) continue;
            const auto g = curve_group_of(taxonomy.group_of(other.label));
            if (!g || *g != target) continue;
            const double dx =
                std::abs(other.bac_centroid_mm.x() - bone.bac_centroid_mm.x());
            if (dx < best_dx) {
                best_dx = dx;
                best_label = other.label;
            }
        }
        if (best_label >= 0) return best_label;
        return taxonomy.first_label_of(representative_group(target));
    };

    for (SkeletalBone& bone : bones) {
        const auto group = curve_group_of(taxonomy.group_of(bone.label));
        if (!group) continue; // out-of-family labels are never touched

        const FittedCurve* nearest = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const FittedCurve& c : curves) {
            const double d = c.distance(bone.bac_centroid_mm);
            if (d < best) {
                best = d;
                nearest = &c;
            }
        }
        if (nearest == nullptr || nearest->group == *group) continue;

        const int new_label = label_for_group(nearest->group, bone);
        if (new_label < 0 || new_label == bone.label) continue;
        diffs.push_back({bone.bone_id, bone.label, new_label, best});
        bone.label = new_label;
    }
    return diffs;
}

RelabelResult relabel_fetus(std::vector<SkeletalBone>& bones,
                            const std::vector<BoneInstance>& instances,
                            const BodyFrame& frame,
                            const std::array<double, 3>& spacing_mm,
                            const Taxonomy& taxonomy,
                            const RelabelParams& params) {
    RelabelResult result;

    // Rib sides are geometric after BAC (left = +y); fix classifier side
    // mistakes before the fits see them.
    if (params.rib_side_from_geometry) {
        for (SkeletalBone& b : bones) {
            const BoneGroup g = taxonomy.group_of(b.label);
            if (g != BoneGroup::rib_left && g != BoneGroup::rib_right) continue;
            const bool geometric_left = b.bac_centroid_mm.y() > 0.0;
            const bool labeled_left = g == BoneGroup::rib_left;
            if (geometric_left == labeled_left) continue;
            const int new_label = taxonomy.first_label_of(
                geometric_left ? BoneGroup::rib_left : BoneGroup::rib_right);
            if (new_label >= 0 && new_label != b.label) {
                result.diffs.push_back(
                    {b.bone_id, b.label, new_label, 0.0});
                b.label = new_label;
            }
        }
    }

    const CaudalCutoff cutoff = compute_caudal_cutoff(
        bones, instances, frame, spacing_mm, taxonomy, result.warnings);

    for (int gi = 0; gi <= static_cast<int>(CurveGroup::rib_right); ++gi) {
        const CurveGroup group = static_cast<CurveGroup>(gi);
        const int degree =
            (group == CurveGroup::rib_left || group == CurveGroup::rib_right)
                ? 2
                : 4;
        std::vector<Eigen::Vector3d> pts;
        for (const SkeletalBone& b : bones) {
            const auto g = curve_group_of(taxonomy.group_of(b.label));
            if (!g || *g != group) continue;
            if (!cutoff.keep(b.bac_centroid_mm.x(), b.bac_centroid_mm.y()))
                continue;
            pts.push_back(b.bac_centroid_mm);
        }
        auto curve = fit_group_curve(pts, group, degree, result.warnings);
        if (curve) result.curves.push_back(std::move(*curve));
    }

    if (result.curves.empty()) {
        result.warnings.push_back("relabeling skipped: no curve could be fit");
        return result;
    }

    auto diffs = relabel_by_curves(bones, result.curves, taxonomy);
    result.diffs.insert(result.diffs.end(), diffs.begin(), diffs.end());
    return result;
}

void write_relabel_csv(const std::vector<RelabelDiff>& diffs,
                       const Taxonomy& taxonomy,
                       const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create relabel CSV: " + path.string());
        }
        out.precision(17);
        out << "bone_id,old_label,new_label,distance_mm\n";
        for (const RelabelDiff& d : diffs) {
            out << d.bone_id << ',' << taxonomy.name_of(d.old_label) << ','
                << taxonomy.name_of(d.new_label) << ',' << d.distance_mm
                << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace skelscreen
