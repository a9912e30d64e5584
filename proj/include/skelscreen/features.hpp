#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "skelscreen/localize.hpp"

namespace skelscreen {

// Shape descriptor of one bone instance: voxel count, centroid (mm),
// inertia tensor eigenvalues (mm^2, ascending) and major axis length (mm).
struct BoneFeatures {
    std::int64_t n_voxels = 0;
    Eigen::Vector3d centroid_mm = Eigen::Vector3d::Zero();
    Eigen::Vector3d inertia_eigs_mm2 = Eigen::Vector3d::Zero(); // ascending
    double major_axis_mm = 0.0;

    Eigen::Matrix<double, 8, 1> as_row() const;
};

enum class FeatureStage { raw, bac, spectral, concat16 };

// Per-fetus feature matrix. Raw/Bac stages carry the 8 columns
// [n_voxels, cx, cy, cz, l1, l2, l3, major_axis]; the spectral stage has
// embed_dim columns and Concat16 has 16.
struct FeatureMatrix {
    FeatureStage stage = FeatureStage::raw;
    std::vector<int> bone_ids;
    Eigen::MatrixXd values;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

// Feature extraction for one bone. The inertia tensor uses unit voxel mass
// about the centroid; the major axis is the extent of voxel centers along
// the covariance's dominant eigenvector plus one voxel spacing along the
// grid axis that eigenvector leans on.
BoneFeatures extract_features(const BoneInstance& b,
                              const std::array<double, 3>& spacing_mm);

// Stack per-bone features into the Raw stage matrix, rows in input order.
FeatureMatrix assemble_matrix(const std::vector<BoneFeatures>& features,
                              const std::vector<int>& bone_ids);

void write_feature_csv(const FeatureMatrix& m,
                       const std::filesystem::path& path);
FeatureMatrix read_feature_csv(const std::filesystem::path& path,
                               FeatureStage stage);

} // namespace skelscreen
