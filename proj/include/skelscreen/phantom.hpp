#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include "skelscreen/rules.hpp"
#include "skelscreen/taxonomy.hpp"
#include "skelscreen/volume.hpp"

namespace skelscreen {

// Abnormality injections; each is the constructive inverse of one
// screening rule.
struct Injection {
    enum class Kind {
        remove_vertebra,    // drop body+arches (+ribs) at a vertebra
        scale_vertebra,     // scale one body's voxel volume by factor
        shorten_caudal_rib, // scale the most caudal rib's length by factor
    };
    Kind kind = Kind::remove_vertebra;
    int vertebra_index = 0; // 0 = most cranial, over all vertebrae
    int side = 0;           // 0 = left, 1 = right (rib injections)
    double factor = 0.5;    // voxel-volume or length factor, in (0,1)
};

struct PhantomSpec {
    uint64_t seed = 0;
    double spacing_mm = 0.06;
    int n_cervical = 7;
    int n_thoracic = 13;
    int n_lumbar = 6;
    int n_rib_pairs = 13;
    Eigen::Matrix3d pose_rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d pose_translation_mm = Eigen::Vector3d::Zero();
    double noise_hu = 15.0;
    std::vector<Injection> injections;
};

struct TruthBone {
    int truth_id = 0; // value in the truth label volume
    int label = 0;    // taxonomy index
    int fetus_id = 0;
    std::int64_t n_voxels = 0;
    Eigen::Vector3d centroid_mm = Eigen::Vector3d::Zero(); // volume frame
    double major_axis_mm = 0.0;
    double spine_x = 0.0; // canonical head-tail coordinate, for ordering
};

struct PhantomTruth {
    std::vector<TruthBone> bones;
    LabelVolume labels; // truth_id per core voxel, 0 elsewhere
    Verdict expected_verdict = Verdict::normal;
    std::set<int> expected_rules; // subset of {1,2,3}
};

// Deterministic synthetic rat-fetus skeleton: ellipsoid and capsule
// primitives along a parametric spine, bone cores at ~700 HU wrapped in a
// ~500 HU border shell over ~0 HU background, plus seeded Gaussian noise.
// Identical specs produce byte-identical volumes. Generation fails when
// primitives of distinct bones touch (their truth labels would merge).
std::pair<VoxelVolume, PhantomTruth> generate(const PhantomSpec& spec);

// Two posed copies of the skeleton in one volume, the second translated by
// offset_mm. Their dilated bounding boxes must be disjoint.
std::pair<VoxelVolume, PhantomTruth> generate_pair(
    const PhantomSpec& spec, const Eigen::Vector3d& offset_mm);

// On-disk bundle: <stem>.hdr/.raw (scan), <stem>_truth.hdr/.raw (labels)
// and <stem>_truth.json (bones, expected verdict and rules).
void write_phantom_bundle(const VoxelVolume& volume, const PhantomTruth& truth,
                          const std::filesystem::path& dir,
                          const std::string& stem);
PhantomTruth load_truth_bundle(const std::filesystem::path& dir,
                               const std::string& stem);

} // namespace skelscreen
