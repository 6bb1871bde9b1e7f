#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ecpe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

// A named trainable array and its gradient accumulator.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Index rows, Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    Index size() const { return value.size(); }
};

using ParameterList = std::vector<Parameter*>;

inline void zero_grads(const ParameterList& params)
{
    for (Parameter* p : params) {
        p->zero_grad();
    }
}

// Derives an independent generator from a base seed and a list of stream ids.
// Used wherever a result must not depend on iteration order.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

void fill_uniform(Matrix& m, double bound, Rng& rng);
void fill_normal(Matrix& m, double stddev, Rng& rng);

// Orthogonal (or semi-orthogonal for non-square) matrix from the QR of a Gaussian draw.
Matrix orthogonal(Index rows, Index cols, Rng& rng);

bool all_finite(const Matrix& m);

} // namespace ecpe
