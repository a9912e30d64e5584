#pragma once

#include <Eigen/Dense>

#include "skelscreen/features.hpp"

namespace skelscreen {

struct SpectralParams {
    int k_neighbors = 10;
    int embed_dim = 8;
};

// Per-column z-score statistics, fitted on training data and stored in the
// model so train/test normalization agree.
struct ColumnStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
};

ColumnStats fit_column_stats(const Eigen::MatrixXd& values);
Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& values,
                                  const ColumnStats& stats);

// Laplacian-eigenmaps embedding of one fetus' feature rows: z-score
// normalize, build a symmetric k-NN graph with Gaussian affinities
// (sigma = median pairwise distance), take eigenvectors 2..embed_dim+1 of
// the symmetric normalized Laplacian (ascending eigenvalue) rescaled by
// D^-1/2 (the standard eigenmaps coordinates), zero-padding when fewer are
// available. Each eigenvector's sign is fixed so its largest-magnitude
// entry is positive (ties to the lower row). Exactly-identical rows share
// one graph node and therefore one embedding row; all points identical
// (sigma = 0) yields an all-zero embedding.
FeatureMatrix spectral_embed(const FeatureMatrix& input,
                             const SpectralParams& params,
                             const ColumnStats& stats);

// [input | embedding] concatenation; 8+8 = 16 columns for the standard
// pipeline. Row counts must match.
FeatureMatrix concat_features(const FeatureMatrix& base,
                              const FeatureMatrix& spectral);

// Exposed for the embedding contract tests: the symmetric normalized
// Laplacian of the k-NN affinity graph over pre-normalized rows, plus the
// node degrees used for the eigenmaps rescale.
Eigen::MatrixXd knn_gaussian_laplacian(const Eigen::MatrixXd& normalized,
                                       int k_neighbors);
Eigen::MatrixXd knn_gaussian_laplacian(const Eigen::MatrixXd& normalized,
                                       int k_neighbors,
                                       Eigen::VectorXd& degrees);

} // namespace skelscreen
