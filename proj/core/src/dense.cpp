#include "ecpe/dense.hpp"

#include "ecpe/error.hpp"

namespace ecpe {

Dense::Dense(const std::string& name, Index in, Index out)
    : weight(name + ".weight", in, out), bias(name + ".bias", 1, out)
{
}

void Dense::init(Rng& rng)
{
    fill_uniform(weight.value, 1.0 / std::sqrt(static_cast<double>(in_width())), rng);
    bias.value.setZero();
}

Matrix Dense::forward(const Matrix& x) const
{
    if (x.cols() != in_width()) {
        throw ShapeError(weight.name + ": input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(in_width()));
    }
    Matrix y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy)
{
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value.transpose();
}

Matrix sigmoid(const Matrix& z)
{
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix dropout_mask(Index rows, Index cols, double rate, Rng& rng)
{
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ShapeError("dropout rate must lie in [0, 1)");
    }
    Matrix mask = Matrix::Ones(rows, cols);
    if (rate == 0.0) {
        return mask;
    }
    std::bernoulli_distribution drop(rate);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            mask(i, j) = drop(rng) ? 0.0 : keep_scale;
        }
    }
    return mask;
}

} // namespace ecpe
