#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "skelscreen/spectral.hpp"
#include "skelscreen/taxonomy.hpp"

namespace skelscreen {

// Ablation selector: which feature blocks feed the classifier. Blocks are
// concatenated in the fixed order raw, bac, spectral(raw), spectral(bac).
struct FeatureConfig {
    bool raw = false;
    bool bac = true;
    bool spectral_raw = false;
    bool spectral_bac = true;

    int dimension(int spectral_dim) const {
        return (raw ? 8 : 0) + (bac ? 8 : 0) +
               (spectral_raw ? spectral_dim : 0) +
               (spectral_bac ? spectral_dim : 0);
    }
    bool any() const { return raw || bac || spectral_raw || spectral_bac; }
    uint32_t mask() const {
        return (raw ? 1u : 0u) | (bac ? 2u : 0u) | (spectral_raw ? 4u : 0u) |
               (spectral_bac ? 8u : 0u);
    }
    static FeatureConfig from_mask(uint32_t m) {
        return {(m & 1u) != 0, (m & 2u) != 0, (m & 4u) != 0, (m & 8u) != 0};
    }
};

FeatureConfig parse_feature_config(const std::string& csv);
std::string feature_config_to_string(const FeatureConfig& c);

struct GbdtParams {
    int n_rounds = 718;
    double learning_rate = 0.0394;
    int max_depth = 8;
};

// Axis-aligned regression tree stored as a flat node array (node 0 = root).
// Leaf values already include the learning rate.
struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    double eval(const Eigen::RowVectorXd& x) const;
};

struct GbdtModel {
    GbdtParams params;
    int n_classes = 0;
    int n_features = 0;
    std::vector<RegressionTree> trees; // trees[round * n_classes + class]
    // Pipeline context carried with the classifier so screening runs are
    // self-contained: normalization statistics for the two spectral
    // sources, embedding parameters, taxonomy and the feature selection.
    ColumnStats raw_stats;
    ColumnStats bac_stats;
    SpectralParams spectral;
    Taxonomy taxonomy;
    FeatureConfig feature_config;

    void validate() const;
};

struct Prediction {
    int label = 0;
    Eigen::VectorXd probabilities;
};

// Softmax-objective gradient boosting with exact greedy split search.
// One tree per class per round; deterministic: candidate splits are
// enumerated in (feature index, ascending threshold) order and gain ties
// keep the first candidate. round_loss, when non-null, receives the mean
// training cross-entropy after each round.
std::vector<RegressionTree> train_gbdt(const Eigen::MatrixXd& x,
                                       const std::vector<int>& y,
                                       int n_classes, const GbdtParams& params,
                                       std::vector<double>* round_loss);

Eigen::MatrixXd gbdt_scores(const std::vector<RegressionTree>& trees,
                            int n_classes, const Eigen::MatrixXd& x);

std::vector<Prediction> predict(const GbdtModel& model,
                                const Eigen::MatrixXd& features);

// Versioned binary container; round trips are bit-exact.
void save_model(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_model(const std::filesystem::path& path);

} // namespace skelscreen
