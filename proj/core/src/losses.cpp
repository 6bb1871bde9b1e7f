#include "ecpe/losses.hpp"

#include "ecpe/dense.hpp"
#include "ecpe/error.hpp"

#include <cmath>

namespace ecpe {

RowVector log_softmax(const RowVector& logits)
{
    const double m = logits.maxCoeff();
    const RowVector shifted = logits.array() - m;
    const double lse = std::log(shifted.array().exp().sum());
    return shifted.array() - lse;
}

RowVector softmax(const RowVector& logits)
{
    const RowVector e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

Matrix softmax_rows(const Matrix& logits)
{
    Matrix out(logits.rows(), logits.cols());
    for (Index t = 0; t < logits.rows(); ++t) {
        out.row(t) = softmax(logits.row(t));
    }
    return out;
}

double cross_entropy(const RowVector& logits, int target)
{
    return -log_softmax(logits)(target);
}

double weighted_cross_entropy(const RowVector& logits, int target, const Vector& class_weights)
{
    return class_weights(target) * cross_entropy(logits, target);
}

double binary_cross_entropy(double logit, int target)
{
    const double t = static_cast<double>(target);
    return std::max(logit, 0.0) - logit * t + std::log1p(std::exp(-std::abs(logit)));
}

LossAndGrad weighted_cross_entropy_mean(const Matrix& logits, std::span<const int> targets,
                                        const Vector& class_weights)
{
    if (static_cast<Index>(targets.size()) != logits.rows()) {
        throw ShapeError("cross-entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(logits.rows()) + " rows");
    }
    if (class_weights.size() != logits.cols()) {
        throw ShapeError("cross-entropy: class weight count does not match logit width");
    }
    const double inv_n = 1.0 / static_cast<double>(logits.rows());
    LossAndGrad out;
    out.grad.resize(logits.rows(), logits.cols());
    for (Index t = 0; t < logits.rows(); ++t) {
        const int y = targets[static_cast<std::size_t>(t)];
        if (y < 0 || y >= logits.cols()) {
            throw ValidationError("cross-entropy target out of range: " + std::to_string(y));
        }
        const RowVector p = softmax(logits.row(t));
        out.loss += weighted_cross_entropy(logits.row(t), y, class_weights);
        out.grad.row(t) = class_weights(y) * inv_n * p;
        out.grad(t, y) -= class_weights(y) * inv_n;
    }
    out.loss *= inv_n;
    return out;
}

LossAndGrad binary_cross_entropy_mean(const Matrix& logits, std::span<const int> targets)
{
    if (logits.cols() != 1 || static_cast<Index>(targets.size()) != logits.rows()) {
        throw ShapeError("binary cross-entropy expects N x 1 logits and N targets");
    }
    const double inv_n = 1.0 / static_cast<double>(logits.rows());
    LossAndGrad out;
    out.grad.resize(logits.rows(), 1);
    for (Index i = 0; i < logits.rows(); ++i) {
        const int y = targets[static_cast<std::size_t>(i)];
        out.loss += binary_cross_entropy(logits(i, 0), y);
        out.grad(i, 0) = (sigmoid(logits(i, 0)) - static_cast<double>(y)) * inv_n;
    }
    out.loss *= inv_n;
    return out;
}

} // namespace ecpe
