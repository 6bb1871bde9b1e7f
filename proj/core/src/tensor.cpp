#include "ecpe/tensor.hpp"

#include <cmath>

namespace ecpe {

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream)
{
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * stream.size());
    auto push = [&words](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (std::uint64_t s : stream) {
        push(s);
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

void fill_uniform(Matrix& m, double bound, Rng& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            m(i, j) = dist(rng);
        }
    }
}

void fill_normal(Matrix& m, double stddev, Rng& rng)
{
    std::normal_distribution<double> dist(0.0, stddev);
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            m(i, j) = dist(rng);
        }
    }
}

Matrix orthogonal(Index rows, Index cols, Rng& rng)
{
    const bool tall = rows >= cols;
    Matrix a(tall ? rows : cols, tall ? cols : rows);
    fill_normal(a, 1.0, rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
    // Sign fix so the result is uniformly distributed.
    Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    for (Index j = 0; j < q.cols(); ++j) {
        if (r(j, j) < 0) {
            q.col(j) *= -1.0;
        }
    }
    return tall ? q : Matrix(q.transpose());
}

bool all_finite(const Matrix& m)
{
    return m.allFinite();
}

} // namespace ecpe
