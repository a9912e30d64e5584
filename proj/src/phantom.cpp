#include "skelscreen/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "skelscreen/errors.hpp"
#include "skelscreen/features.hpp"

namespace skelscreen {

namespace {

constexpr int16_t kBoneHu = 700;
constexpr int16_t kShellHu = 500;

constexpr int kNeighbors26[26][3] = {
    {-1, -1, -1}, {0, -1, -1}, {1, -1, -1}, {-1, 0, -1}, {0, 0, -1},
    {1, 0, -1},   {-1, 1, -1}, {0, 1, -1},  {1, 1, -1},  {-1, -1, 0},
    {0, -1, 0},   {1, -1, 0},  {-1, 0, 0},  {1, 0, 0},   {-1, 1, 0},
    {0, 1, 0},    {1, 1, 0},   {-1, -1, 1}, {0, -1, 1},  {1, -1, 1},
    {-1, 0, 1},   {0, 0, 1},   {1, 0, 1},   {-1, 1, 1},  {0, 1, 1},
    {1, 1, 1}};

struct Ellipsoid {
    Eigen::Vector3d center;
    Eigen::Vector3d semi;
};

struct Rod {
    Eigen::Vector3d a, b;
    double radius;
};

enum class BoneKind : uint8_t { generic, vertebral_body, rib };

// One truth bone in canonical (design) coordinates.
struct SkelBone {
    int label = 0;
    std::vector<Ellipsoid> blobs;
    std::vector<Rod> rods;
    double spine_x = 0.0;   // canonical head-tail coordinate for ordering
    BoneKind kind = BoneKind::generic;
    int vertebra_index = -1;
    int rib_side = -1;      // 0 left, 1 right
    int rib_ordinal = -1;   // 0 = most cranial rib
};

double uniform_pm(std::mt19937_64& rng) {
    // deterministic uniform in [-1, 1)
    return (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0;
}

double gauss(std::mt19937_64& rng) {
    // Box-Muller on raw 53-bit uniforms; independent of libstdc++
    // distribution internals.
    const double u1 =
        (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Geometry of the canonical skeleton. All positions are relative to the
// spine curve; sizes carry a per-phantom global scale plus small per-bone
// jitter so trained classifiers face honest variation.
struct SkeletonBuild {
    std::vector<SkelBone> bones;
};

SkeletonBuild build_skeleton(const PhantomSpec& spec, const Taxonomy& tax) {
    if (spec.n_cervical < 0 || spec.n_thoracic < 0 || spec.n_lumbar < 0 ||
        spec.n_rib_pairs < 0) {
        throw Error(ErrorCode::bad_value, "phantom counts must be >= 0");
    }
    const int n_vertebrae = spec.n_cervical + spec.n_thoracic + spec.n_lumbar;
    if (n_vertebrae < 2) {
        throw Error(ErrorCode::infeasible_spec,
                    "phantom needs at least 2 vertebrae");
    }
    const int n_ribs = std::min(spec.n_rib_pairs, spec.n_thoracic);

    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull + 0x517CC1B7ull);
    const double g = 1.0 + 0.04 * uniform_pm(rng);     // global size scale
    const double pitch = 0.72 * (1.0 + 0.015 * uniform_pm(rng));
    const double bow_y = 1.00 * (1.0 + 0.08 * uniform_pm(rng));
    const double bow_z = 1.20 * (1.0 + 0.08 * uniform_pm(rng));

    const double x_head = (n_vertebrae - 1) * pitch;
    const double x_mid = 0.5 * x_head;
    const double x_half = std::max(0.5 * x_head, 1e-9);
    // The bow is clamped outside the vertebral range so skull and pelvis
    // attachments sit on a flat continuation of the spine ends.
    auto spine_y = [&](double x) {
        const double t = (std::clamp(x, 0.0, x_head) - x_mid) / x_half;
        return bow_y * (1.0 - t * t);
    };
    auto spine_z = [&](double x) {
        const double t = (std::clamp(x, 0.0, x_head) - x_mid) / x_half;
        return bow_z * (1.0 - t * t);
    };
    auto on_spine = [&](double x, double dy, double dz) {
        return Eigen::Vector3d(x, spine_y(x) + dy, spine_z(x) + dz);
    };
    auto jitter = [&]() { return 1.0 + 0.015 * uniform_pm(rng); };

    SkeletonBuild sk;
    auto add_blob = [&](const std::string& label, double x, double dy,
                        double dz, double sx, double sy, double sz) {
        SkelBone b;
        b.label = tax.index_of(label);
        if (b.label < 0) {
            throw Error(ErrorCode::bad_value,
                        "phantom label missing from taxonomy: " + label);
        }
        b.blobs.push_back({on_spine(x, dy * g, dz * g),
                           Eigen::Vector3d(sx * g * jitter(), sy * g * jitter(),
                                           sz * g * jitter())});
        b.spine_x = x;
        sk.bones.push_back(std::move(b));
        return static_cast<int>(sk.bones.size()) - 1;
    };
    auto add_rod = [&](const std::string& label, double x,
                       const Eigen::Vector3d& da, const Eigen::Vector3d& db,
                       double radius) {
        SkelBone b;
        b.label = tax.index_of(label);
        if (b.label < 0) {
            throw Error(ErrorCode::bad_value,
                        "phantom label missing from taxonomy: " + label);
        }
        b.rods.push_back({on_spine(x, 0, 0) + da * g, on_spine(x, 0, 0) + db * g,
                          radius * g * jitter()});
        b.spine_x = x;
        sk.bones.push_back(std::move(b));
        return static_cast<int>(sk.bones.size()) - 1;
    };

    // Skull: heavy cluster past the first cervical vertebra. Its mass has
    // to dominate the pelvic quartile by a wide margin, since the
    // head/tail rule keys on it and the watershed inflates small bones
    // proportionally more than these large plates.
    add_blob("occipital_bone", x_head + 1.05, 0.0, 0.10, 0.53, 0.78, 0.60);
    add_blob("parietal_bone_left", x_head + 2.15, 0.75, 0.85, 0.59, 0.34, 0.45);
    add_blob("parietal_bone_right", x_head + 2.15, -0.75, 0.85, 0.59, 0.34, 0.45);
    add_blob("interparietal_bone", x_head + 2.15, 0.0, 1.85, 0.53, 0.42, 0.28);
    add_blob("frontal_bone", x_head + 3.55, 0.0, 0.60, 0.59, 0.62, 0.46);
    add_blob("nasal_bone", x_head + 5.00, 0.0, 0.35, 0.34, 0.24, 0.20);
    add_blob("mandible_left", x_head + 3.50, 0.68, -0.85, 0.67, 0.24, 0.24);
    add_blob("mandible_right", x_head + 3.50, -0.68, -0.85, 0.67, 0.24, 0.24);

    // Vertebral column: bodies on the curve, arch pairs dorsal. The size
    // ramp is smooth within each region and peaks at the thoracolumbar
    // junction; the cervical region is smaller and sits 0.30 mm dorsal, a
    // crisp cervicothoracic marker that leaves the rule-1 voxel-count
    // deltas well inside the similarity band.
    const int ramp_peak = std::max(1, spec.n_cervical + spec.n_thoracic - 1);
    auto ramp = [&](int v) {
        if (v < spec.n_cervical) {
            return 0.80 + 0.15 * static_cast<double>(v) /
                              std::max(1, spec.n_cervical - 1);
        }
        if (v <= ramp_peak) {
            return 0.97 + 0.08 * static_cast<double>(v - spec.n_cervical) /
                              std::max(1, ramp_peak - spec.n_cervical);
        }
        return 1.05 - 0.07 * static_cast<double>(v - ramp_peak) /
                          std::max(1, n_vertebrae - 1 - ramp_peak);
    };
    std::vector<int> body_index(n_vertebrae, -1);
    for (int v = 0; v < n_vertebrae; ++v) {
        const double x = (n_vertebrae - 1 - v) * pitch;
        const double s = ramp(v);
        const bool cervical = v < spec.n_cervical;
        const double dz = cervical ? 0.30 : 0.0;
        const char* body_label = cervical ? "cervical_vertebral_body"
                                 : v < spec.n_cervical + spec.n_thoracic
                                     ? "thoracic_vertebral_body"
                                     : "lumbar_vertebral_body";
        const int bi = add_blob(body_label, x, 0.0, dz, 0.20 * s, 0.24 * s,
                                0.20 * s);
        sk.bones[bi].kind = BoneKind::vertebral_body;
        sk.bones[bi].vertebra_index = v;
        body_index[v] = bi;

        for (int side = 0; side < 2; ++side) {
            const double sy = side == 0 ? 1.0 : -1.0;
            const int ai = add_blob(side == 0 ? "vertebral_arch_left"
                                              : "vertebral_arch_right",
                                    x, sy * 0.55, 0.55 + dz, 0.16 * s,
                                    0.18 * s, 0.14 * s);
            sk.bones[ai].vertebra_index = v;
        }
    }

    // Ribs: curved capsule chains on the thoracic vertebrae, length rising
    // to mid-thorax then tapering gently toward the tail. Caudal ribs also
    // thin out, which keeps the pelvic quartile light.
    const int rib_peak = std::max(1, std::min(7, n_ribs - 1));
    std::vector<std::array<int, 2>> rib_index(n_vertebrae, {-1, -1});
    for (int k = 0; k < n_ribs; ++k) {
        const int v = spec.n_cervical + k;
        const double x = (n_vertebrae - 1 - v) * pitch;
        double len = k <= rib_peak
                         ? 1.0 + 0.28 * k
                         : (1.0 + 0.28 * rib_peak) * (1.0 - 0.08 * (k - rib_peak));
        len *= 1.0 + 0.02 * uniform_pm(rng);
        const double rib_radius =
            k <= rib_peak ? 0.11
                          : 0.11 * (1.0 - 0.15 * (k - rib_peak) /
                                              std::max(1, n_ribs - 1 - rib_peak));
        for (int side = 0; side < 2; ++side) {
            const double sy = side == 0 ? 1.0 : -1.0;
            const Eigen::Vector3d p0(-0.10, sy * 1.10, 0.20);
            const Eigen::Vector3d p1(-0.20, sy * (1.10 + 0.50 * len),
                                     0.10 - 0.10 * len);
            const Eigen::Vector3d p2(-0.28, sy * (1.10 + 0.85 * len),
                                     -0.50 * len);
            SkelBone b;
            b.label = tax.index_of(side == 0 ? "rib_left" : "rib_right");
            b.spine_x = x;
            b.kind = BoneKind::rib;
            b.vertebra_index = v;
            b.rib_side = side;
            b.rib_ordinal = k;
            const Eigen::Vector3d base = on_spine(x, 0, 0);
            constexpr int kSegments = 8;
            Eigen::Vector3d prev = base + p0 * g;
            for (int si = 1; si <= kSegments; ++si) {
                const double t = static_cast<double>(si) / kSegments;
                const Eigen::Vector3d q = (1 - t) * (1 - t) * p0 +
                                          2 * t * (1 - t) * p1 + t * t * p2;
                const Eigen::Vector3d cur = base + q * g;
                b.rods.push_back({prev, cur, rib_radius * g});
                prev = cur;
            }
            sk.bones.push_back(std::move(b));
            rib_index[v][side] = static_cast<int>(sk.bones.size()) - 1;
        }
    }

    // Sternebrae along the ventral midline.
    for (int i = 0; i < 3; ++i) {
        add_blob("sternebra", x_mid + 2.5 - 0.9 * i, 0.0, -2.1, 0.18, 0.14,
                 0.10);
    }

    // Forelimbs near the cervicothoracic junction, hindlimbs by the ilia.
    // All segments of one limb are rooted at a single spine point so the
    // lateral bow cannot squeeze one side's joints together.
    const double fore_x = x_head - 2.6;
    for (int side = 0; side < 2; ++side) {
        const double sy = side == 0 ? 1.0 : -1.0;
        const char* sides = side == 0 ? "left" : "right";
        add_blob(std::string("scapula_") + sides, fore_x + 0.6, sy * 1.45,
                 0.80, 0.45, 0.16, 0.30);
        add_rod(std::string("humerus_") + sides, fore_x,
                Eigen::Vector3d(0.55, sy * 1.80, -0.15),
                Eigen::Vector3d(-0.45, sy * 2.20, -1.00), 0.13);
        add_rod(std::string("radius_") + sides, fore_x,
                Eigen::Vector3d(-0.90, sy * 2.45, -1.30),
                Eigen::Vector3d(-1.60, sy * 2.65, -1.65), 0.095);
        add_rod(std::string("ulna_") + sides, fore_x,
                Eigen::Vector3d(-0.60, sy * 2.80, -0.65),
                Eigen::Vector3d(-1.50, sy * 3.15, -1.20), 0.085);
    }
    const double hind_x = 1.7;
    for (int side = 0; side < 2; ++side) {
        const double sy = side == 0 ? 1.0 : -1.0;
        const char* sides = side == 0 ? "left" : "right";
        add_blob(std::string("ilium_") + sides, 0.10, sy * 0.95, -0.15, 0.48,
                 0.13, 0.17);
        add_rod(std::string("femur_") + sides, hind_x,
                Eigen::Vector3d(0.0, sy * 1.15, -0.45),
                Eigen::Vector3d(1.6, sy * 1.75, -1.00), 0.125);
        add_rod(std::string("tibia_") + sides, hind_x,
                Eigen::Vector3d(2.05, sy * 2.15, -1.25),
                Eigen::Vector3d(3.80, sy * 2.40, -1.60), 0.10);
    }

    // Injections. Each only shrinks or removes geometry, so the spacing
    // guarantees of the normal skeleton carry over.
    std::vector<bool> removed(sk.bones.size(), false);
    for (const Injection& inj : spec.injections) {
        switch (inj.kind) {
            case Injection::Kind::remove_vertebra: {
                const int v = inj.vertebra_index;
                if (v < 0 || v >= n_vertebrae) {
                    throw Error(ErrorCode::bad_value,
                                "remove_vertebra index out of range");
                }
                for (size_t i = 0; i < sk.bones.size(); ++i) {
                    if (sk.bones[i].vertebra_index == v) removed[i] = true;
                }
                break;
            }
            case Injection::Kind::scale_vertebra: {
                const int v = inj.vertebra_index;
                if (v < 0 || v >= n_vertebrae || body_index[v] < 0) {
                    throw Error(ErrorCode::bad_value,
                                "scale_vertebra index out of range");
                }
                if (!(inj.factor > 0.0 && inj.factor < 1.0)) {
                    throw Error(ErrorCode::bad_value,
                                "scale_vertebra factor must be in (0,1)");
                }
                const double axis_scale = std::cbrt(inj.factor);
                for (Ellipsoid& e : sk.bones[body_index[v]].blobs) {
                    e.semi *= axis_scale;
                }
                break;
            }
            case Injection::Kind::shorten_caudal_rib: {
                if (inj.side != 0 && inj.side != 1) {
                    throw Error(ErrorCode::bad_value,
                                "shorten_caudal_rib side must be 0 or 1");
                }
                if (!(inj.factor > 0.0 && inj.factor < 1.0)) {
                    throw Error(ErrorCode::bad_value,
                                "shorten_caudal_rib factor must be in (0,1)");
                }
                int target = -1;
                for (int v = n_vertebrae - 1; v >= 0; --v) {
                    const int bi = rib_index[v][inj.side];
                    if (bi >= 0 && !removed[bi]) {
                        target = bi;
                        break;
                    }
                }
                if (target < 0) {
                    throw Error(ErrorCode::bad_value,
                                "shorten_caudal_rib: no rib on that side");
                }
                // Contract the rod chain toward its spine-side start.
                SkelBone& rib = sk.bones[target];
                const Eigen::Vector3d anchor = rib.rods.front().a;
                for (Rod& r : rib.rods) {
                    r.a = anchor + (r.a - anchor) * inj.factor;
                    r.b = anchor + (r.b - anchor) * inj.factor;
                }
                break;
            }
        }
    }
    SkeletonBuild pruned;
    for (size_t i = 0; i < sk.bones.size(); ++i) {
        if (!removed[i]) pruned.bones.push_back(std::move(sk.bones[i]));
    }
    return pruned;
}

struct PosedBone {
    const SkelBone* bone;
    int truth_id;
    int fetus_id;
    Eigen::Matrix3d rot;      // design -> world
    Eigen::Vector3d shift;    // world = rot*(p - pivot) + pivot + shift
    Eigen::Vector3d pivot;
};

Eigen::Vector3d posed_point(const PosedBone& pb, const Eigen::Vector3d& p) {
    return pb.rot * (p - pb.pivot) + pb.pivot + pb.shift;
}

void bone_bbox(const PosedBone& pb, Eigen::Vector3d& lo, Eigen::Vector3d& hi) {
    lo.setConstant(std::numeric_limits<double>::infinity());
    hi.setConstant(-std::numeric_limits<double>::infinity());
    for (const Ellipsoid& e : pb.bone->blobs) {
        const Eigen::Vector3d c = posed_point(pb, e.center);
        for (int i = 0; i < 3; ++i) {
            double half = 0.0;
            for (int j = 0; j < 3; ++j) {
                half += (pb.rot(i, j) * e.semi[j]) * (pb.rot(i, j) * e.semi[j]);
            }
            half = std::sqrt(half);
            lo[i] = std::min(lo[i], c[i] - half);
            hi[i] = std::max(hi[i], c[i] + half);
        }
    }
    for (const Rod& r : pb.bone->rods) {
        const Eigen::Vector3d a = posed_point(pb, r.a);
        const Eigen::Vector3d b = posed_point(pb, r.b);
        for (int i = 0; i < 3; ++i) {
            lo[i] = std::min(lo[i], std::min(a[i], b[i]) - r.radius);
            hi[i] = std::max(hi[i], std::max(a[i], b[i]) + r.radius);
        }
    }
}

double point_segment_distance(const Eigen::Vector3d& p,
                              const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
    const Eigen::Vector3d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

std::pair<VoxelVolume, PhantomTruth> rasterize(
    const PhantomSpec& spec, const std::vector<SkeletonBuild>& skeletons,
    const std::vector<Eigen::Vector3d>& fetus_offsets, const Taxonomy& tax) {
    const double sp = spec.spacing_mm;
    if (!(sp > 0.0)) {
        throw Error(ErrorCode::bad_value, "phantom spacing must be > 0");
    }

    // Pose every bone; the pivot is the skeleton's blob/rod centroid so
    // rotations keep the bounding box compact.
    std::vector<PosedBone> posed;
    std::vector<Eigen::Vector3d> fetus_lo(skeletons.size()),
        fetus_hi(skeletons.size());
    for (size_t f = 0; f < skeletons.size(); ++f) {
        Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
        int count = 0;
        for (const SkelBone& b : skeletons[f].bones) {
            for (const Ellipsoid& e : b.blobs) {
                pivot += e.center;
                ++count;
            }
            for (const Rod& r : b.rods) {
                pivot += 0.5 * (r.a + r.b);
                ++count;
            }
        }
        pivot /= std::max(1, count);
        fetus_lo[f].setConstant(std::numeric_limits<double>::infinity());
        fetus_hi[f].setConstant(-std::numeric_limits<double>::infinity());
        for (const SkelBone& b : skeletons[f].bones) {
            PosedBone pb;
            pb.bone = &b;
            pb.truth_id = static_cast<int>(posed.size()) + 1;
            pb.fetus_id = static_cast<int>(f);
            pb.rot = spec.pose_rotation;
            pb.pivot = pivot;
            pb.shift = spec.pose_translation_mm + fetus_offsets[f];
            Eigen::Vector3d lo, hi;
            bone_bbox(pb, lo, hi);
            fetus_lo[f] = fetus_lo[f].cwiseMin(lo);
            fetus_hi[f] = fetus_hi[f].cwiseMax(hi);
            posed.push_back(pb);
        }
    }

    // Dilated per-fetus bounding boxes must stay disjoint.
    const double guard = 3.0 * sp;
    for (size_t a = 0; a < skeletons.size(); ++a) {
        for (size_t b = a + 1; b < skeletons.size(); ++b) {
            bool overlap = true;
            for (int i = 0; i < 3; ++i) {
                if (fetus_hi[a][i] + guard < fetus_lo[b][i] - guard ||
                    fetus_hi[b][i] + guard < fetus_lo[a][i] - guard) {
                    overlap = false;
                }
            }
            if (overlap) {
                throw Error(ErrorCode::infeasible_spec,
                            "fetus bounding boxes overlap; increase offset");
            }
        }
    }

    Eigen::Vector3d lo = fetus_lo[0], hi = fetus_hi[0];
    for (size_t f = 1; f < skeletons.size(); ++f) {
        lo = lo.cwiseMin(fetus_lo[f]);
        hi = hi.cwiseMax(fetus_hi[f]);
    }
    const double margin = 0.4 + 2.0 * sp;
    const Eigen::Vector3d origin = lo.array() - margin;
    std::array<int, 3> dims;
    for (int i = 0; i < 3; ++i) {
        dims[i] = static_cast<int>(
                      std::ceil((hi[i] + margin - origin[i]) / sp)) +
                  1;
    }

    LabelVolume truth;
    truth.dims = dims;
    truth.spacing_mm = {sp, sp, sp};
    truth.data.assign(static_cast<size_t>(truth.voxel_count()), 0);

    auto center_of = [&](int x, int y, int z) -> Eigen::Vector3d {
        return origin + Eigen::Vector3d((x + 0.5) * sp, (y + 0.5) * sp,
                                        (z + 0.5) * sp);
    };

    // Rasterize cores. Distinct truth labels must never collide.
    for (const PosedBone& pb : posed) {
        auto paint = [&](const Eigen::Vector3d& plo, const Eigen::Vector3d& phi,
                         auto&& inside) {
            const int x0 = std::max(0, static_cast<int>((plo.x() - origin.x()) / sp) - 1);
            const int y0 = std::max(0, static_cast<int>((plo.y() - origin.y()) / sp) - 1);
            const int z0 = std::max(0, static_cast<int>((plo.z() - origin.z()) / sp) - 1);
            const int x1 = std::min(dims[0] - 1, static_cast<int>((phi.x() - origin.x()) / sp) + 1);
            const int y1 = std::min(dims[1] - 1, static_cast<int>((phi.y() - origin.y()) / sp) + 1);
            const int z1 = std::min(dims[2] - 1, static_cast<int>((phi.z() - origin.z()) / sp) + 1);
            for (int z = z0; z <= z1; ++z) {
                for (int y = y0; y <= y1; ++y) {
                    for (int x = x0; x <= x1; ++x) {
                        if (!inside(center_of(x, y, z))) continue;
                        uint16_t& cell = truth.at(x, y, z);
                        if (cell != 0 && cell != pb.truth_id) {
                            throw Error(
                                ErrorCode::infeasible_spec,
                                "phantom primitives of " +
                                    tax.name_of(posed[cell - 1].bone->label) +
                                    " and " + tax.name_of(pb.bone->label) +
                                    " overlap");
                        }
                        cell = static_cast<uint16_t>(pb.truth_id);
                    }
                }
            }
        };
        for (const Ellipsoid& e : pb.bone->blobs) {
            const Eigen::Vector3d c = posed_point(pb, e.center);
            Eigen::Vector3d blo, bhi;
            for (int i = 0; i < 3; ++i) {
                double half = 0.0;
                for (int j = 0; j < 3; ++j) {
                    half += (pb.rot(i, j) * e.semi[j]) * (pb.rot(i, j) * e.semi[j]);
                }
                half = std::sqrt(half);
                blo[i] = c[i] - half;
                bhi[i] = c[i] + half;
            }
            paint(blo, bhi, [&](const Eigen::Vector3d& p) {
                const Eigen::Vector3d d =
                    pb.rot.transpose() * (p - c); // back to design axes
                const double q = (d.array() / e.semi.array()).matrix().squaredNorm();
                return q <= 1.0;
            });
        }
        for (const Rod& r : pb.bone->rods) {
            const Eigen::Vector3d a = posed_point(pb, r.a);
            const Eigen::Vector3d b = posed_point(pb, r.b);
            const Eigen::Vector3d blo = a.cwiseMin(b).array() - r.radius;
            const Eigen::Vector3d bhi = a.cwiseMax(b).array() + r.radius;
            paint(blo, bhi, [&](const Eigen::Vector3d& p) {
                return point_segment_distance(p, a, b) <= r.radius;
            });
        }
    }


    // Border shell: one-voxel 26-dilation around each core, owner tracked
    // so bridges between different bones are detected.
    std::vector<uint16_t> shell_owner(truth.data.size(), 0);
    const int nx = dims[0], ny = dims[1], nz = dims[2];
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const uint16_t id = truth.at(x, y, z);
                if (id == 0) continue;
                for (const auto& d : kNeighbors26) {
                    const int cx = x + d[0], cy = y + d[1], cz = z + d[2];
                    if (cx < 0 || cx >= nx || cy < 0 || cy >= ny || cz < 0 ||
                        cz >= nz) {
                        throw Error(ErrorCode::infeasible_spec,
                                    "phantom touches the volume boundary");
                    }
                    const std::int64_t ni = truth.index(cx, cy, cz);
                    if (truth.data[ni] != 0) continue;
                    if (shell_owner[ni] != 0 && shell_owner[ni] != id) {
                        throw Error(
                            ErrorCode::infeasible_spec,
                            "border shells of " +
                                tax.name_of(
                                    posed[shell_owner[ni] - 1].bone->label) +
                                " and " + tax.name_of(posed[id - 1].bone->label) +
                                " collide");
                    }
                    shell_owner[ni] = id;
                }
            }
        }
    }
    // Shell voxels of different owners must not be 26-adjacent either, or
    // the watershed would join their bones.
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const std::int64_t i = truth.index(x, y, z);
                if (shell_owner[i] == 0 || truth.data[i] != 0) continue;
                for (const auto& d : kNeighbors26) {
                    const int cx = x + d[0], cy = y + d[1], cz = z + d[2];
                    if (cx < 0 || cx >= nx || cy < 0 || cy >= ny || cz < 0 ||
                        cz >= nz)
                        continue;
                    const std::int64_t ni = truth.index(cx, cy, cz);
                    const uint16_t other =
                        truth.data[ni] != 0 ? truth.data[ni] : shell_owner[ni];
                    if (other != 0 && other != shell_owner[i]) {
                        throw Error(
                            ErrorCode::infeasible_spec,
                            tax.name_of(
                                posed[shell_owner[i] - 1].bone->label) +
                                " and " +
                                tax.name_of(posed[other - 1].bone->label) +
                                " are bridged by their shells");
                    }
                }
            }
        }
    }

    // HU volume with seeded Gaussian noise.
    VoxelVolume vol;
    vol.dims = dims;
    vol.spacing_mm = {sp, sp, sp};
    vol.data.resize(truth.data.size());
    std::mt19937_64 noise_rng(spec.seed * 0xC2B2AE3D27D4EB4Full +
                              0x165667B1ull);
    for (size_t i = 0; i < truth.data.size(); ++i) {
        double hu = truth.data[i] != 0 ? kBoneHu
                    : shell_owner[i] != 0 ? kShellHu
                                          : 0.0;
        if (spec.noise_hu > 0.0) {
            hu += spec.noise_hu * gauss(noise_rng);
        }
        vol.data[i] = static_cast<int16_t>(
            std::clamp(std::lround(hu), -32768l, 32767l));
    }

    // Truth bookkeeping from the rasterized cores.
    PhantomTruth out;
    out.labels = std::move(truth);
    std::vector<BoneInstance> truth_instances(posed.size());
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const uint16_t id = out.labels.at(x, y, z);
                if (id != 0) {
                    truth_instances[id - 1].voxels.push_back({x, y, z});
                }
            }
        }
    }
    for (size_t i = 0; i < posed.size(); ++i) {
        if (truth_instances[i].voxels.empty()) {
            throw Error(ErrorCode::infeasible_spec,
                        "phantom bone rasterized to zero voxels (truth id " +
                            std::to_string(posed[i].truth_id) + ", label " +
                            tax.name_of(posed[i].bone->label) + ")");
        }
        const BoneFeatures f =
            extract_features(truth_instances[i], vol.spacing_mm);
        TruthBone tb;
        tb.truth_id = posed[i].truth_id;
        tb.label = posed[i].bone->label;
        tb.fetus_id = posed[i].fetus_id;
        tb.n_voxels = f.n_voxels;
        tb.centroid_mm = f.centroid_mm;
        tb.major_axis_mm = f.major_axis_mm;
        tb.spine_x = posed[i].bone->spine_x;
        out.bones.push_back(tb);
    }

    // Expected rule outcomes, evaluated per fetus on the truth bones with
    // the default thresholds.
    const RuleThresholds thresholds;
    for (size_t f = 0; f < skeletons.size(); ++f) {
        std::vector<const TruthBone*> bodies;
        std::vector<int> thoracolumbar;
        std::vector<std::pair<double, std::pair<int, double>>> left, right;
        for (size_t i = 0; i < out.bones.size(); ++i) {
            const TruthBone& tb = out.bones[i];
            if (tb.fetus_id != static_cast<int>(f)) continue;
            const SkelBone& sb = *posed[i].bone;
            if (sb.kind == BoneKind::vertebral_body) {
                bodies.push_back(&tb);
                const BoneGroup grp = tax.group_of(tb.label);
                if (grp == BoneGroup::vertebral_body_thoracic ||
                    grp == BoneGroup::vertebral_body_lumbar) {
                    thoracolumbar.push_back(tb.truth_id);
                }
            } else if (sb.kind == BoneKind::rib) {
                auto& dst = sb.rib_side == 0 ? left : right;
                dst.push_back({tb.spine_x, {tb.truth_id, tb.major_axis_mm}});
            }
        }
        std::sort(bodies.begin(), bodies.end(),
                  [](const TruthBone* a, const TruthBone* b) {
                      return a->spine_x < b->spine_x;
                  });
        std::vector<std::pair<int, std::int64_t>> ordered;
        for (const TruthBone* b : bodies) {
            ordered.emplace_back(b->truth_id, b->n_voxels);
        }
        auto sorted_side = [](auto& v) {
            std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
                return a.first < b.first;
            });
            std::vector<std::pair<int, double>> out_v;
            for (const auto& e : v) out_v.push_back(e.second);
            return out_v;
        };
        const RuleOutcome r1 =
            rule1_vertebral_volume(ordered, thresholds.rule1_delta);
        const RuleOutcome r2 =
            rule2_vertebral_count(thoracolumbar, thresholds.rule2_min_bodies);
        const RuleOutcome r3 = rule3_caudal_rib(
            sorted_side(left), sorted_side(right), thresholds.rule3_delta);
        if (r1.fired) out.expected_rules.insert(1);
        if (r2.fired) out.expected_rules.insert(2);
        if (r3.fired) out.expected_rules.insert(3);
    }
    out.expected_verdict =
        out.expected_rules.empty() ? Verdict::normal : Verdict::abnormal;
    return {std::move(vol), std::move(out)};
}

} // namespace

std::pair<VoxelVolume, PhantomTruth> generate(const PhantomSpec& spec) {
    const Taxonomy tax = default_taxonomy();
    std::vector<SkeletonBuild> sk;
    sk.push_back(build_skeleton(spec, tax));
    return rasterize(spec, sk, {Eigen::Vector3d::Zero()}, tax);
}

std::pair<VoxelVolume, PhantomTruth> generate_pair(
    const PhantomSpec& spec, const Eigen::Vector3d& offset_mm) {
    const Taxonomy tax = default_taxonomy();
    std::vector<SkeletonBuild> sk;
    sk.push_back(build_skeleton(spec, tax));
    sk.push_back(build_skeleton(spec, tax));
    return rasterize(spec, sk, {Eigen::Vector3d::Zero(), offset_mm}, tax);
}

void write_phantom_bundle(const VoxelVolume& volume, const PhantomTruth& truth,
                          const std::filesystem::path& dir,
                          const std::string& stem) {
    std::filesystem::create_directories(dir);
    save_volume(volume, dir / (stem + ".hdr"));
    save_label_volume(truth.labels, dir / (stem + "_truth.hdr"));

    nlohmann::json j;
    j["expected_verdict"] = verdict_name(truth.expected_verdict);
    j["expected_rules"] = truth.expected_rules;
    j["bones"] = nlohmann::json::array();
    const Taxonomy tax = default_taxonomy();
    for (const TruthBone& b : truth.bones) {
        nlohmann::json jb;
        jb["truth_id"] = b.truth_id;
        jb["label"] = b.label;
        jb["label_name"] = tax.name_of(b.label);
        jb["fetus_id"] = b.fetus_id;
        jb["n_voxels"] = b.n_voxels;
        jb["centroid_mm"] = {b.centroid_mm.x(), b.centroid_mm.y(),
                             b.centroid_mm.z()};
        jb["major_axis_mm"] = b.major_axis_mm;
        jb["spine_x"] = b.spine_x;
        j["bones"].push_back(jb);
    }
    const std::filesystem::path path = dir / (stem + "_truth.json");
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create truth JSON: " + path.string());
        }
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

PhantomTruth load_truth_bundle(const std::filesystem::path& dir,
                               const std::string& stem) {
    PhantomTruth truth;
    truth.labels = load_label_volume(dir / (stem + "_truth.hdr"));

    const std::filesystem::path path = dir / (stem + "_truth.json");
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open truth JSON: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::bad_format,
                    "malformed truth JSON: " + std::string(e.what()));
    }
    truth.expected_verdict = j.at("expected_verdict").get<std::string>() ==
                                     "Abnormal"
                                 ? Verdict::abnormal
                                 : Verdict::normal;
    for (const auto& r : j.at("expected_rules")) {
        truth.expected_rules.insert(r.get<int>());
    }
    for (const auto& jb : j.at("bones")) {
        TruthBone b;
        b.truth_id = jb.at("truth_id").get<int>();
        b.label = jb.at("label").get<int>();
        b.fetus_id = jb.at("fetus_id").get<int>();
        b.n_voxels = jb.at("n_voxels").get<std::int64_t>();
        const auto& c = jb.at("centroid_mm");
        b.centroid_mm = Eigen::Vector3d(c.at(0).get<double>(),
                                        c.at(1).get<double>(),
                                        c.at(2).get<double>());
        b.major_axis_mm = jb.at("major_axis_mm").get<double>();
        b.spine_x = jb.at("spine_x").get<double>();
        truth.bones.push_back(b);
    }
    return truth;
}

} // namespace skelscreen
