#pragma once

#include <Eigen/Dense>

#include "skelscreen/features.hpp"

namespace skelscreen {

// Rigid body-axis frame: maps scanner-space centroids c to canonical
// coordinates rotation*c + translation, with the head toward +x, left
// toward +y and the weighted centroid at the origin.
struct BodyFrame {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation_mm = Eigen::Vector3d::Zero();
    bool head_sign_flipped = false;

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation_mm;
    }
};

// Two-step weighted-PCA body axis fit on a Raw feature matrix (weights =
// voxel counts). Step one aligns the principal axes of the centroid cloud
// with x,y,z and composes a 180-degree rotation about y when the voxel
// mass in the most-positive quartile of the x range is smaller than the
// mass in the most-negative quartile (head ends at +x). Step two refines
// the spine direction from the bones on the negative x half, composing the
// minimal rotation that takes that subset's principal direction to +x.
// Requires at least 3 bones with non-collinear centroids.
BodyFrame fit_bac(const FeatureMatrix& raw);

// Maps the centroid columns through the frame; voxel counts, inertia
// eigenvalues and major axis pass through unchanged (rotation-invariant).
FeatureMatrix apply_bac(const FeatureMatrix& raw, const BodyFrame& frame);

} // namespace skelscreen
