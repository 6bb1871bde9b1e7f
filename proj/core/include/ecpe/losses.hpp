#pragma once

#include "ecpe/tensor.hpp"

#include <span>

namespace ecpe {

// Max-subtracted softmax over a single row of logits.
RowVector softmax(const RowVector& logits);
RowVector log_softmax(const RowVector& logits);
// Row-wise softmax for a T x K matrix.
Matrix softmax_rows(const Matrix& logits);

double cross_entropy(const RowVector& logits, int target);
// -w[target] * log softmax(logits)[target]
double weighted_cross_entropy(const RowVector& logits, int target, const Vector& class_weights);

// Stable form: max(z, 0) - z t + log1p(exp(-|z|)).
double binary_cross_entropy(double logit, int target);

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;  // same shape as the scores it differentiates
};

// Mean over rows of the weighted cross-entropy.
LossAndGrad weighted_cross_entropy_mean(const Matrix& logits, std::span<const int> targets,
                                        const Vector& class_weights);

// logits is N x 1; mean over rows.
LossAndGrad binary_cross_entropy_mean(const Matrix& logits, std::span<const int> targets);

} // namespace ecpe
