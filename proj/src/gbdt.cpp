#include "skelscreen/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "skelscreen/errors.hpp"

namespace skelscreen {

FeatureConfig parse_feature_config(const std::string& csv) {
    FeatureConfig c{false, false, false, false};
    std::string token;
    std::istringstream in(csv);
    while (std::getline(in, token, ',')) {
        // trim
        const auto b = token.find_first_not_of(" \t");
        const auto e = token.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        token = token.substr(b, e - b + 1);
        if (token == "raw") c.raw = true;
        else if (token == "bac") c.bac = true;
        else if (token == "spectral_raw") c.spectral_raw = true;
        else if (token == "spectral_bac") c.spectral_bac = true;
        else {
            throw Error(ErrorCode::bad_value,
                        "unknown feature config token: " + token);
        }
    }
    if (!c.any()) {
        throw Error(ErrorCode::bad_value, "feature config must be non-empty");
    }
    return c;
}

std::string feature_config_to_string(const FeatureConfig& c) {
    std::string s;
    auto add = [&](const char* t) {
        if (!s.empty()) s += ',';
        s += t;
    };
    if (c.raw) add("raw");
    if (c.bac) add("bac");
    if (c.spectral_raw) add("spectral_raw");
    if (c.spectral_bac) add("spectral_bac");
    return s;
}

double RegressionTree::eval(const Eigen::RowVectorXd& x) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
        i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left
                                                     : nodes[i].right;
    }
    return nodes[i].value;
}

void GbdtModel::validate() const {
    if (n_classes < 2 || n_features < 1) {
        throw Error(ErrorCode::bad_value, "model class/feature counts invalid");
    }
    if (trees.size() != static_cast<size_t>(params.n_rounds) * n_classes) {
        throw Error(ErrorCode::bad_value,
                    "model tree count does not equal n_rounds * n_classes");
    }
    for (const RegressionTree& t : trees) {
        for (const TreeNode& n : t.nodes) {
            if (n.feature >= n_features) {
                throw Error(ErrorCode::bad_value,
                            "model split feature index out of range");
            }
        }
    }
}

namespace {

constexpr double kHessianEps = 1e-16;
constexpr double kMaxNewtonStep = 1e3;

struct SplitCandidate {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

double leaf_weight(double g, double h) {
    double step = -g / (h + kHessianEps);
    return std::clamp(step, -kMaxNewtonStep, kMaxNewtonStep);
}

double gain_term(double g, double h) { return g * g / (h + kHessianEps); }

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& g,
                const Eigen::VectorXd& h, const GbdtParams& params)
        : x_(x), g_(g), h_(h), params_(params) {}

    RegressionTree build(const std::vector<std::vector<int>>& root_order) {
        RegressionTree tree;
        grow(tree, root_order, 0);
        return tree;
    }

private:
    // order: per feature, the node's sample indices sorted ascending by
    // feature value (ties by index). Returns the new node's index.
    int grow(RegressionTree& tree, const std::vector<std::vector<int>>& order,
             int depth) {
        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        double gsum = 0.0, hsum = 0.0;
        for (int i : order[0]) {
            gsum += g_[i];
            hsum += h_[i];
        }
        const size_t n = order[0].size();

        SplitCandidate best;
        if (depth < params_.max_depth && n >= 2) {
            best = find_best_split(order, gsum, hsum);
        }
        if (!best.found) {
            tree.nodes[node_index].value =
                params_.learning_rate * leaf_weight(gsum, hsum);
            return node_index;
        }

        const int d = static_cast<int>(order.size());
        std::vector<std::vector<int>> left_order(d), right_order(d);
        for (int f = 0; f < d; ++f) {
            for (int i : order[f]) {
                if (x_(i, best.feature) < best.threshold) {
                    left_order[f].push_back(i);
                } else {
                    right_order[f].push_back(i);
                }
            }
        }

        tree.nodes[node_index].feature = best.feature;
        tree.nodes[node_index].threshold = best.threshold;
        const int l = grow(tree, left_order, depth + 1);
        tree.nodes[node_index].left = l;
        const int r = grow(tree, right_order, depth + 1);
        tree.nodes[node_index].right = r;
        return node_index;
    }

    SplitCandidate find_best_split(
        const std::vector<std::vector<int>>& order, double gsum,
        double hsum) const {
        SplitCandidate best;
        const double parent = gain_term(gsum, hsum);
        for (size_t f = 0; f < order.size(); ++f) {
            const std::vector<int>& ord = order[f];
            double gl = 0.0, hl = 0.0;
            for (size_t j = 0; j + 1 < ord.size(); ++j) {
                gl += g_[ord[j]];
                hl += h_[ord[j]];
                const double v = x_(ord[j], static_cast<int>(f));
                const double vn = x_(ord[j + 1], static_cast<int>(f));
                if (!(v < vn)) continue;
                const double gain = 0.5 * (gain_term(gl, hl) +
                                           gain_term(gsum - gl, hsum - hl) -
                                           parent);
                // Strict > keeps the first candidate on ties, i.e. the
                // lowest (feature, threshold) pair; gain must beat 0.
                if (gain > best.gain) {
                    best.found = true;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (v + vn);
                    best.gain = gain;
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& g_;
    const Eigen::VectorXd& h_;
    const GbdtParams& params_;
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd p(scores.rows(), scores.cols());
    for (int i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
        p.row(i) = e / e.sum();
    }
    return p;
}

double mean_cross_entropy(const Eigen::MatrixXd& probs,
                          const std::vector<int>& y) {
    double loss = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        loss -= std::log(std::max(probs(static_cast<int>(i), y[i]), 1e-300));
    }
    return loss / static_cast<double>(y.size());
}

} // namespace

std::vector<RegressionTree> train_gbdt(const Eigen::MatrixXd& x,
                                       const std::vector<int>& y,
                                       int n_classes, const GbdtParams& params,
                                       std::vector<double>* round_loss) {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    if (n == 0 || static_cast<size_t>(n) != y.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "training rows and labels must align");
    }
    std::set<int> distinct(y.begin(), y.end());
    if (distinct.size() < 2) {
        throw Error(ErrorCode::bad_value,
                    "training requires at least 2 distinct labels");
    }
    if (*distinct.begin() < 0 || *distinct.rbegin() >= n_classes) {
        throw Error(ErrorCode::bad_value, "label outside class range");
    }
    if (params.n_rounds < 1 || params.max_depth < 1 ||
        !(params.learning_rate > 0.0)) {
        throw Error(ErrorCode::bad_value, "invalid GBDT hyperparameters");
    }

    // Global per-feature argsort; node-level orders are stable partitions
    // of these, so samples never get re-sorted.
    std::vector<std::vector<int>> root_order(d);
    for (int f = 0; f < d; ++f) {
        root_order[f].resize(n);
        std::iota(root_order[f].begin(), root_order[f].end(), 0);
        std::sort(root_order[f].begin(), root_order[f].end(),
                  [&](int a, int b) {
                      if (x(a, f) != x(b, f)) return x(a, f) < x(b, f);
                      return a < b;
                  });
    }

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, n_classes);
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<size_t>(params.n_rounds) * n_classes);
    if (round_loss) round_loss->clear();

    Eigen::VectorXd g(n), h(n);
    for (int round = 0; round < params.n_rounds; ++round) {
        const Eigen::MatrixXd probs = softmax_rows(scores);
        for (int k = 0; k < n_classes; ++k) {
            for (int i = 0; i < n; ++i) {
                const double p = probs(i, k);
                g[i] = p - (y[i] == k ? 1.0 : 0.0);
                h[i] = std::max(p * (1.0 - p), kHessianEps);
            }
            TreeBuilder builder(x, g, h, params);
            RegressionTree tree = builder.build(root_order);
            for (int i = 0; i < n; ++i) {
                scores(i, k) += tree.eval(x.row(i));
            }
            trees.push_back(std::move(tree));
        }
        if (round_loss) {
            round_loss->push_back(mean_cross_entropy(softmax_rows(scores), y));
        }
    }
    return trees;
}

Eigen::MatrixXd gbdt_scores(const std::vector<RegressionTree>& trees,
                            int n_classes, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd scores =
        Eigen::MatrixXd::Zero(x.rows(), n_classes);
    const int rounds = static_cast<int>(trees.size()) / n_classes;
    for (int r = 0; r < rounds; ++r) {
        for (int k = 0; k < n_classes; ++k) {
            const RegressionTree& t = trees[static_cast<size_t>(r) * n_classes + k];
            for (int i = 0; i < x.rows(); ++i) {
                scores(i, k) += t.eval(x.row(i));
            }
        }
    }
    return scores;
}

std::vector<Prediction> predict(const GbdtModel& model,
                                const Eigen::MatrixXd& features) {
    if (features.cols() != model.n_features) {
        throw Error(ErrorCode::dimension_mismatch,
                    "feature dimension does not match model (" +
                        std::to_string(features.cols()) + " vs " +
                        std::to_string(model.n_features) + ")");
    }
    const Eigen::MatrixXd scores =
        gbdt_scores(model.trees, model.n_classes, features);
    const Eigen::MatrixXd probs = softmax_rows(scores);
    std::vector<Prediction> out(static_cast<size_t>(features.rows()));
    for (int i = 0; i < features.rows(); ++i) {
        int arg = 0;
        for (int k = 1; k < model.n_classes; ++k) {
            if (probs(i, k) > probs(i, arg)) arg = k; // ties keep lower index
        }
        out[static_cast<size_t>(i)].label = arg;
        out[static_cast<size_t>(i)].probabilities = probs.row(i).transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model container. Little-endian binary, bit-exact round trips.

namespace {

constexpr uint32_t kMagic = 0x4247534Bu; // "KSGB"
constexpr uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void u32(uint32_t v) { raw(&v, sizeof v); }
    void i32(int32_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void vec(const Eigen::VectorXd& v) {
        u32(static_cast<uint32_t>(v.size()));
        for (int i = 0; i < v.size(); ++i) f64(v[i]);
    }

private:
    void raw(const void* p, size_t n) {
        out_.write(static_cast<const char*>(p),
                   static_cast<std::streamsize>(n));
    }
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}
    uint32_t u32() {
        uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    int32_t i32() {
        int32_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::string str() {
        const uint32_t n = u32();
        if (n > (1u << 20)) {
            throw Error(ErrorCode::model_format, "corrupt string length");
        }
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    Eigen::VectorXd vec() {
        const uint32_t n = u32();
        if (n > (1u << 20)) {
            throw Error(ErrorCode::model_format, "corrupt vector length");
        }
        Eigen::VectorXd v(n);
        for (uint32_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }

private:
    void raw(void* p, size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) {
            throw Error(ErrorCode::model_format, "truncated model file");
        }
    }
    std::istream& in_;
};

} // namespace

void save_model(const GbdtModel& model, const std::filesystem::path& path) {
    model.validate();
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::missing_file,
                        "cannot create model file: " + path.string());
        }
        Writer w(out);
        w.u32(kMagic);
        w.u32(kVersion);
        w.i32(model.params.n_rounds);
        w.f64(model.params.learning_rate);
        w.i32(model.params.max_depth);
        w.i32(model.n_classes);
        w.i32(model.n_features);
        w.u32(model.feature_config.mask());
        w.i32(model.spectral.k_neighbors);
        w.i32(model.spectral.embed_dim);
        w.vec(model.raw_stats.mean);
        w.vec(model.raw_stats.stddev);
        w.vec(model.bac_stats.mean);
        w.vec(model.bac_stats.stddev);
        w.u32(static_cast<uint32_t>(model.taxonomy.size()));
        for (int i = 0; i < model.taxonomy.size(); ++i) {
            w.str(model.taxonomy.labels[i]);
            w.u32(static_cast<uint32_t>(model.taxonomy.groups[i]));
        }
        w.u32(static_cast<uint32_t>(model.trees.size()));
        for (const RegressionTree& t : model.trees) {
            w.u32(static_cast<uint32_t>(t.nodes.size()));
            for (const TreeNode& n : t.nodes) {
                w.i32(n.feature);
                w.f64(n.threshold);
                w.i32(n.left);
                w.i32(n.right);
                w.f64(n.value);
            }
        }
        if (!out) {
            throw Error(ErrorCode::model_format,
                        "short write on model file: " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

GbdtModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::missing_file,
                    "cannot open model file: " + path.string());
    }
    Reader r(in);
    if (r.u32() != kMagic) {
        throw Error(ErrorCode::model_format, "not a model file");
    }
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw Error(ErrorCode::model_version,
                    "unsupported model version " + std::to_string(version));
    }
    GbdtModel m;
    m.params.n_rounds = r.i32();
    m.params.learning_rate = r.f64();
    m.params.max_depth = r.i32();
    m.n_classes = r.i32();
    m.n_features = r.i32();
    m.feature_config = FeatureConfig::from_mask(r.u32());
    m.spectral.k_neighbors = r.i32();
    m.spectral.embed_dim = r.i32();
    m.raw_stats.mean = r.vec();
    m.raw_stats.stddev = r.vec();
    m.bac_stats.mean = r.vec();
    m.bac_stats.stddev = r.vec();
    const uint32_t n_labels = r.u32();
    if (n_labels > 4096) {
        throw Error(ErrorCode::model_format, "corrupt taxonomy length");
    }
    for (uint32_t i = 0; i < n_labels; ++i) {
        m.taxonomy.labels.push_back(r.str());
        const uint32_t g = r.u32();
        if (g > static_cast<uint32_t>(BoneGroup::other)) {
            throw Error(ErrorCode::model_format, "corrupt group tag");
        }
        m.taxonomy.groups.push_back(static_cast<BoneGroup>(g));
    }
    const uint32_t n_trees = r.u32();
    if (n_trees > (1u << 24)) {
        throw Error(ErrorCode::model_format, "corrupt tree count");
    }
    m.trees.resize(n_trees);
    for (uint32_t t = 0; t < n_trees; ++t) {
        const uint32_t n_nodes = r.u32();
        if (n_nodes == 0 || n_nodes > (1u << 22)) {
            throw Error(ErrorCode::model_format, "corrupt node count");
        }
        m.trees[t].nodes.resize(n_nodes);
        for (uint32_t i = 0; i < n_nodes; ++i) {
            TreeNode& n = m.trees[t].nodes[i];
            n.feature = r.i32();
            n.threshold = r.f64();
            n.left = r.i32();
            n.right = r.i32();
            n.value = r.f64();
            if (n.feature >= 0 &&
                (n.left < 0 || n.right < 0 ||
                 n.left >= static_cast<int>(n_nodes) ||
                 n.right >= static_cast<int>(n_nodes))) {
                throw Error(ErrorCode::model_format, "corrupt tree topology");
            }
        }
    }
    m.validate();
    return m;
}

} // namespace skelscreen
