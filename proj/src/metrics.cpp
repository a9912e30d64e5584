#include "skelscreen/metrics.hpp"

#include "skelscreen/errors.hpp"

namespace skelscreen {

EvalResult evaluate_labels(const std::vector<int>& predicted,
                           const std::vector<int>& truth, int n_classes) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "prediction/truth length mismatch");
    }
    if (predicted.empty()) {
        throw Error(ErrorCode::bad_value, "cannot evaluate an empty set");
    }
    EvalResult r;
    r.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 ||
            predicted[i] >= n_classes) {
            throw Error(ErrorCode::bad_value, "label outside class range");
        }
        r.confusion(truth[i], predicted[i])++;
    }
    r.accuracy = static_cast<double>(r.confusion.trace()) /
                 static_cast<double>(truth.size());

    double sens_sum = 0.0, prec_sum = 0.0;
    int present = 0;
    for (int k = 0; k < n_classes; ++k) {
        const int truth_count = r.confusion.row(k).sum();
        const int pred_count = r.confusion.col(k).sum();
        if (truth_count == 0 && pred_count == 0) continue;
        ++present;
        const int tp = r.confusion(k, k);
        sens_sum += truth_count > 0
                        ? static_cast<double>(tp) / truth_count
                        : 0.0;
        prec_sum += pred_count > 0 ? static_cast<double>(tp) / pred_count
                                   : 0.0;
    }
    if (present > 0) {
        r.macro_sensitivity = sens_sum / present;
        r.macro_precision = prec_sum / present;
    }
    return r;
}

BinaryEval evaluate_verdicts(const std::vector<Verdict>& predicted,
                             const std::vector<Verdict>& truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "prediction/truth length mismatch");
    }
    if (predicted.empty()) {
        throw Error(ErrorCode::bad_value, "cannot evaluate an empty set");
    }
    BinaryEval b;
    for (size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] == Verdict::abnormal;
        const bool t = truth[i] == Verdict::abnormal;
        if (p && t) b.tp++;
        else if (p && !t) b.fp++;
        else if (!p && t) b.fn++;
        else b.tn++;
    }
    b.sensitivity = (b.tp + b.fn) > 0
                        ? static_cast<double>(b.tp) / (b.tp + b.fn)
                        : 0.0;
    b.precision = (b.tp + b.fp) > 0
                      ? static_cast<double>(b.tp) / (b.tp + b.fp)
                      : 0.0;
    b.accuracy = static_cast<double>(b.tp + b.tn) /
                 static_cast<double>(truth.size());
    return b;
}

} // namespace skelscreen
