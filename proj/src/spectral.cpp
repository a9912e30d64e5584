#include "skelscreen/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "skelscreen/errors.hpp"

namespace skelscreen {

ColumnStats fit_column_stats(const Eigen::MatrixXd& values) {
    ColumnStats s;
    const int n = static_cast<int>(values.rows());
    s.mean = values.colwise().mean();
    s.stddev.resize(values.cols());
    for (int c = 0; c < values.cols(); ++c) {
        const double var =
            (values.col(c).array() - s.mean[c]).square().sum() / n;
        s.stddev[c] = std::sqrt(var);
    }
    return s;
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& values,
                                  const ColumnStats& stats) {
    if (values.cols() != stats.mean.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "column stats do not match matrix width");
    }
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (int c = 0; c < values.cols(); ++c) {
        const double sd = stats.stddev[c] < 1e-12 ? 1.0 : stats.stddev[c];
        out.col(c) = (values.col(c).array() - stats.mean[c]) / sd;
    }
    return out;
}

namespace {

double median_pairwise_distance(const Eigen::MatrixXd& z) {
    const int n = static_cast<int>(z.rows());
    std::vector<double> d;
    d.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            d.push_back((z.row(i) - z.row(j)).norm());
        }
    }
    std::sort(d.begin(), d.end());
    const size_t m = d.size();
    return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

void fix_eigenvector_signs(Eigen::MatrixXd& vecs) {
    for (int c = 0; c < vecs.cols(); ++c) {
        int arg = 0;
        double best = std::abs(vecs(0, c));
        for (int r = 1; r < vecs.rows(); ++r) {
            if (std::abs(vecs(r, c)) > best) {
                best = std::abs(vecs(r, c));
                arg = r;
            }
        }
        if (vecs(arg, c) < 0.0) vecs.col(c) = -vecs.col(c);
    }
}

} // namespace

Eigen::MatrixXd knn_gaussian_laplacian(const Eigen::MatrixXd& z,
                                       int k_neighbors) {
    Eigen::VectorXd degrees;
    return knn_gaussian_laplacian(z, k_neighbors, degrees);
}

Eigen::MatrixXd knn_gaussian_laplacian(const Eigen::MatrixXd& z,
                                       int k_neighbors,
                                       Eigen::VectorXd& degrees) {
    const int n = static_cast<int>(z.rows());
    const int k = std::min(k_neighbors, n - 1);

    Eigen::MatrixXd dist(n, n);
    for (int i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double d = (z.row(i) - z.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    const double sigma = median_pairwise_distance(z);

    // Union-symmetrized k-NN adjacency with Gaussian affinities.
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
            return a < b;
        });
        int taken = 0;
        for (int j : order) {
            if (j == i) continue;
            if (taken++ >= k) break;
            const double a = std::exp(-dist(i, j) * dist(i, j) /
                                      (sigma * sigma));
            w(i, j) = a;
            w(j, i) = a;
        }
    }

    degrees = w.rowwise().sum();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j || w(i, j) == 0.0) continue;
            const double dd = degrees[i] * degrees[j];
            if (dd > 0.0) lap(i, j) = -w(i, j) / std::sqrt(dd);
        }
    }
    return lap;
}

FeatureMatrix spectral_embed(const FeatureMatrix& input,
                             const SpectralParams& params,
                             const ColumnStats& stats) {
    const int n = input.rows();
    if (n < 2) {
        throw Error(ErrorCode::underdetermined,
                    "spectral_embed requires at least 2 rows");
    }
    if (params.k_neighbors < 1 || params.embed_dim < 1) {
        throw Error(ErrorCode::bad_value, "invalid spectral parameters");
    }

    FeatureMatrix out;
    out.stage = FeatureStage::spectral;
    out.bone_ids = input.bone_ids;
    out.values = Eigen::MatrixXd::Zero(n, params.embed_dim);

    const Eigen::MatrixXd z = normalize_columns(input.values, stats);
    if (median_pairwise_distance(z) == 0.0) {
        return out; // all points identical: zero embedding by convention
    }

    // Exactly-identical rows are one point; they share a graph node and an
    // embedding row.
    std::vector<int> representative(n);
    std::vector<int> unique_rows;
    for (int i = 0; i < n; ++i) {
        int found = -1;
        for (size_t u = 0; u < unique_rows.size(); ++u) {
            if (z.row(unique_rows[u]) == z.row(i)) {
                found = static_cast<int>(u);
                break;
            }
        }
        if (found < 0) {
            found = static_cast<int>(unique_rows.size());
            unique_rows.push_back(i);
        }
        representative[i] = found;
    }
    const int m = static_cast<int>(unique_rows.size());
    Eigen::MatrixXd zu(m, z.cols());
    for (int u = 0; u < m; ++u) zu.row(u) = z.row(unique_rows[u]);

    Eigen::VectorXd degrees;
    const Eigen::MatrixXd lap =
        knn_gaussian_laplacian(zu, params.k_neighbors, degrees);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::stage_failure,
                    "Laplacian eigendecomposition failed");
    }

    const int avail = std::min(params.embed_dim, m - 1);
    if (avail < 1) return out;
    Eigen::MatrixXd vecs = eig.eigenvectors().middleCols(1, avail);
    // Back to eigenmaps coordinates: rows rescaled by D^-1/2.
    for (int u = 0; u < m; ++u) {
        if (degrees[u] > 0.0) vecs.row(u) /= std::sqrt(degrees[u]);
    }
    fix_eigenvector_signs(vecs);
    for (int i = 0; i < n; ++i) {
        out.values.row(i).head(avail) = vecs.row(representative[i]);
    }
    return out;
}

FeatureMatrix concat_features(const FeatureMatrix& base,
                              const FeatureMatrix& spectral) {
    if (base.rows() != spectral.rows()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "concat_features row-count mismatch");
    }
    FeatureMatrix out;
    out.stage = FeatureStage::concat16;
    out.bone_ids = base.bone_ids;
    out.values.resize(base.rows(), base.cols() + spectral.cols());
    out.values << base.values, spectral.values;
    return out;
}

} // namespace skelscreen
