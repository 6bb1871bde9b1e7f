#pragma once

#include "ecpe/tensor.hpp"

#include <cmath>
#include <string>

namespace ecpe {

// y = x W + b, applied row-wise to a batch.
class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, Index in, Index out);

    Index in_width() const { return weight.value.rows(); }
    Index out_width() const { return weight.value.cols(); }

    // Uniform +-1/sqrt(fan_in) weights, zero bias.
    void init(Rng& rng);

    Matrix forward(const Matrix& x) const;
    // Accumulates parameter gradients; returns dL/dx.
    Matrix backward(const Matrix& x, const Matrix& dy);

    ParameterList parameters() { return {&weight, &bias}; }

    Parameter weight;  // in x out
    Parameter bias;    // 1 x out
};

inline double sigmoid(double z)
{
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Matrix sigmoid(const Matrix& z);

// Inverted-dropout mask: each entry is 0 with probability rate, else 1/(1-rate).
Matrix dropout_mask(Index rows, Index cols, double rate, Rng& rng);

} // namespace ecpe
