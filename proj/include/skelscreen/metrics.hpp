#pragma once

#include <Eigen/Dense>
#include <vector>

#include "skelscreen/rules.hpp"

namespace skelscreen {

// Multi-class labeling metrics over a fixed class count. Macro averages
// skip classes absent from both truth and predictions.
struct EvalResult {
    Eigen::MatrixXi confusion; // rows = truth, cols = predicted
    double accuracy = 0.0;
    double macro_sensitivity = 0.0;
    double macro_precision = 0.0;
};

EvalResult evaluate_labels(const std::vector<int>& predicted,
                           const std::vector<int>& truth, int n_classes);

// Binary screening metrics with Abnormal as the positive class.
struct BinaryEval {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    double sensitivity = 0.0;
    double precision = 0.0;
    double accuracy = 0.0;
};

BinaryEval evaluate_verdicts(const std::vector<Verdict>& predicted,
                             const std::vector<Verdict>& truth);

} // namespace skelscreen
