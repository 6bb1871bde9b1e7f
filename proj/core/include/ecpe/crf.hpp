#pragma once

// Linear-chain CRF over K labels. Everything is computed in log space.
//
// score(y) = start[y_0] + sum_t E[t, y_t] + sum_t A[y_t, y_{t+1}] + end[y_{T-1}]

#include "ecpe/tensor.hpp"

#include <span>
#include <vector>

namespace ecpe::crf {

struct CrfParams {
    Matrix transitions;  // K x K, row = from, col = to
    Vector start;        // K
    Vector end;          // K

    static CrfParams zeros(Index num_labels);
    Index num_labels() const { return start.size(); }
};

struct CrfGradients {
    Matrix emissions;  // T x K
    Matrix transitions;
    Vector start;
    Vector end;
};

struct Marginals {
    Matrix unary;               // T x K, P(y_t = k)
    std::vector<Matrix> edges;  // T-1 of K x K, P(y_t = i, y_{t+1} = j)
    double log_partition = 0.0;
};

struct Decoded {
    std::vector<int> labels;
    double score = 0.0;
};

// Throws ShapeError / ValidationError on bad shapes or label indices.
double sequence_score(const Matrix& emissions, const CrfParams& params,
                      std::span<const int> labels);

double log_partition(const Matrix& emissions, const CrfParams& params);

double nll(const Matrix& emissions, const CrfParams& params, std::span<const int> gold);

Marginals marginals(const Matrix& emissions, const CrfParams& params);

// Gradients of nll with respect to emissions and parameters.
CrfGradients gradients(const Matrix& emissions, const CrfParams& params,
                       std::span<const int> gold);

// Max-score labeling. Ties go to the lower label index at every step.
Decoded viterbi(const Matrix& emissions, const CrfParams& params);

// Per-step argmax of the posterior marginals.
std::vector<int> marginal_decode(const Matrix& emissions, const CrfParams& params);

double log_sum_exp(std::span<const double> values);

} // namespace ecpe::crf
