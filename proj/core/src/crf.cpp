#include "ecpe/crf.hpp"

#include "ecpe/error.hpp"

#include <cmath>
#include <limits>

namespace ecpe::crf {

namespace {

void check_shapes(const Matrix& emissions, const CrfParams& params)
{
    const Index k = params.num_labels();
    if (emissions.rows() < 1) {
        throw ShapeError("CRF needs at least one step");
    }
    if (emissions.cols() != k || params.transitions.rows() != k || params.transitions.cols() != k ||
        params.end.size() != k) {
        throw ShapeError("CRF shapes disagree: emissions " + std::to_string(emissions.cols()) +
                         " labels, params " + std::to_string(k));
    }
}

void check_labels(std::span<const int> labels, const Matrix& emissions)
{
    if (static_cast<Index>(labels.size()) != emissions.rows()) {
        throw ShapeError("CRF: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(emissions.rows()) + " steps");
    }
    for (int y : labels) {
        if (y < 0 || y >= emissions.cols()) {
            throw ValidationError("CRF label index out of range: " + std::to_string(y));
        }
    }
}

double lse(const RowVector& v)
{
    const double m = v.maxCoeff();
    if (m == -std::numeric_limits<double>::infinity()) {
        return m;
    }
    return m + std::log((v.array() - m).exp().sum());
}

// alpha(t, k): log-sum of scores of all prefixes ending at (t, k), emission included.
Matrix forward_table(const Matrix& emissions, const CrfParams& params)
{
    const Index steps = emissions.rows();
    const Index k = params.num_labels();
    Matrix alpha(steps, k);
    alpha.row(0) = params.start.transpose() + emissions.row(0);
    for (Index t = 1; t < steps; ++t) {
        for (Index j = 0; j < k; ++j) {
            const RowVector via = alpha.row(t - 1) + params.transitions.col(j).transpose();
            alpha(t, j) = lse(via) + emissions(t, j);
        }
    }
    return alpha;
}

// beta(t, k): log-sum of scores of all suffixes after (t, k), end score included.
Matrix backward_table(const Matrix& emissions, const CrfParams& params)
{
    const Index steps = emissions.rows();
    const Index k = params.num_labels();
    Matrix beta(steps, k);
    beta.row(steps - 1) = params.end.transpose();
    for (Index t = steps - 2; t >= 0; --t) {
        const RowVector next = emissions.row(t + 1) + beta.row(t + 1);
        for (Index i = 0; i < k; ++i) {
            beta(t, i) = lse(params.transitions.row(i) + next);
        }
    }
    return beta;
}

} // namespace

CrfParams CrfParams::zeros(Index num_labels)
{
    return {Matrix::Zero(num_labels, num_labels), Vector::Zero(num_labels), Vector::Zero(num_labels)};
}

double log_sum_exp(std::span<const double> values)
{
    if (values.empty()) {
        return -std::numeric_limits<double>::infinity();
    }
    return lse(Eigen::Map<const RowVector>(values.data(), static_cast<Index>(values.size())));
}

double sequence_score(const Matrix& emissions, const CrfParams& params, std::span<const int> labels)
{
    check_shapes(emissions, params);
    check_labels(labels, emissions);
    double s = params.start(labels[0]);
    for (Index t = 0; t < emissions.rows(); ++t) {
        s += emissions(t, labels[static_cast<std::size_t>(t)]);
        if (t > 0) {
            s += params.transitions(labels[static_cast<std::size_t>(t - 1)], labels[static_cast<std::size_t>(t)]);
        }
    }
    s += params.end(labels.back());
    return s;
}

double log_partition(const Matrix& emissions, const CrfParams& params)
{
    check_shapes(emissions, params);
    const Matrix alpha = forward_table(emissions, params);
    return lse(alpha.row(alpha.rows() - 1) + params.end.transpose());
}

double nll(const Matrix& emissions, const CrfParams& params, std::span<const int> gold)
{
    const double gold_score = sequence_score(emissions, params, gold);
    // Clamp rounding noise; the true value is never negative.
    return std::max(0.0, log_partition(emissions, params) - gold_score);
}

Marginals marginals(const Matrix& emissions, const CrfParams& params)
{
    check_shapes(emissions, params);
    const Index steps = emissions.rows();
    const Index k = params.num_labels();
    const Matrix alpha = forward_table(emissions, params);
    const Matrix beta = backward_table(emissions, params);

    Marginals m;
    m.log_partition = lse(alpha.row(steps - 1) + params.end.transpose());
    m.unary = ((alpha + beta).array() - m.log_partition).exp();
    m.edges.reserve(static_cast<std::size_t>(steps - 1));
    for (Index t = 0; t + 1 < steps; ++t) {
        Matrix edge(k, k);
        for (Index i = 0; i < k; ++i) {
            for (Index j = 0; j < k; ++j) {
                edge(i, j) = std::exp(alpha(t, i) + params.transitions(i, j) + emissions(t + 1, j) +
                                      beta(t + 1, j) - m.log_partition);
            }
        }
        m.edges.push_back(std::move(edge));
    }
    return m;
}

CrfGradients gradients(const Matrix& emissions, const CrfParams& params, std::span<const int> gold)
{
    check_shapes(emissions, params);
    check_labels(gold, emissions);
    const Index steps = emissions.rows();
    const Marginals m = marginals(emissions, params);

    CrfGradients g;
    g.emissions = m.unary;
    g.transitions = Matrix::Zero(params.num_labels(), params.num_labels());
    for (const auto& edge : m.edges) {
        g.transitions += edge;
    }
    g.start = m.unary.row(0).transpose();
    g.end = m.unary.row(steps - 1).transpose();

    for (Index t = 0; t < steps; ++t) {
        g.emissions(t, gold[static_cast<std::size_t>(t)]) -= 1.0;
        if (t > 0) {
            g.transitions(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1.0;
        }
    }
    g.start(gold.front()) -= 1.0;
    g.end(gold.back()) -= 1.0;
    return g;
}

Decoded viterbi(const Matrix& emissions, const CrfParams& params)
{
    check_shapes(emissions, params);
    const Index steps = emissions.rows();
    const Index k = params.num_labels();

    Matrix best(steps, k);
    Eigen::MatrixXi back(steps, k);
    best.row(0) = params.start.transpose() + emissions.row(0);
    for (Index t = 1; t < steps; ++t) {
        for (Index j = 0; j < k; ++j) {
            Index arg = 0;
            double top = best(t - 1, 0) + params.transitions(0, j);
            for (Index i = 1; i < k; ++i) {
                const double s = best(t - 1, i) + params.transitions(i, j);
                if (s > top) {  // strict: ties keep the lower index
                    top = s;
                    arg = i;
                }
            }
            best(t, j) = top + emissions(t, j);
            back(t, j) = static_cast<int>(arg);
        }
    }

    Index last = 0;
    double top = best(steps - 1, 0) + params.end(0);
    for (Index j = 1; j < k; ++j) {
        const double s = best(steps - 1, j) + params.end(j);
        if (s > top) {
            top = s;
            last = j;
        }
    }

    Decoded out;
    out.labels.assign(static_cast<std::size_t>(steps), 0);
    out.labels.back() = static_cast<int>(last);
    for (Index t = steps - 1; t > 0; --t) {
        out.labels[static_cast<std::size_t>(t - 1)] = back(t, out.labels[static_cast<std::size_t>(t)]);
    }
    // Report the exact path score rather than the accumulated DP value.
    out.score = sequence_score(emissions, params, out.labels);
    return out;
}

std::vector<int> marginal_decode(const Matrix& emissions, const CrfParams& params)
{
    const Marginals m = marginals(emissions, params);
    std::vector<int> labels(static_cast<std::size_t>(emissions.rows()));
    for (Index t = 0; t < emissions.rows(); ++t) {
        Index arg = 0;
        m.unary.row(t).maxCoeff(&arg);
        labels[static_cast<std::size_t>(t)] = static_cast<int>(arg);
    }
    return labels;
}

} // namespace ecpe::crf
