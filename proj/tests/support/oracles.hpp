#pragma once

// Test-only reference implementations. Nothing here calls into the code it
// checks: scores are summed straight from the arrays and every labeling is
// enumerated.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

struct CrfInstance {
    Eigen::MatrixXd emissions;    // T x K
    Eigen::MatrixXd transitions;  // K x K
    Eigen::VectorXd start;
    Eigen::VectorXd end;
};

inline CrfInstance random_crf(int steps, int labels, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> n(0.0, scale);
    CrfInstance c{Eigen::MatrixXd(steps, labels), Eigen::MatrixXd(labels, labels),
                  Eigen::VectorXd(labels), Eigen::VectorXd(labels)};
    for (int i = 0; i < c.emissions.size(); ++i) c.emissions.data()[i] = n(rng);
    for (int i = 0; i < c.transitions.size(); ++i) c.transitions.data()[i] = n(rng);
    for (int i = 0; i < labels; ++i) c.start(i) = n(rng);
    for (int i = 0; i < labels; ++i) c.end(i) = n(rng);
    return c;
}

inline double path_score(const CrfInstance& c, const std::vector<int>& y)
{
    double s = c.start(y.front()) + c.end(y.back());
    for (std::size_t t = 0; t < y.size(); ++t) {
        s += c.emissions(static_cast<int>(t), y[t]);
        if (t > 0) s += c.transitions(y[t - 1], y[t]);
    }
    return s;
}

// Calls fn(labels) for every one of K^T labelings, in lexicographic order.
template <typename Fn>
void for_each_labeling(int steps, int labels, Fn fn)
{
    std::vector<int> y(static_cast<std::size_t>(steps), 0);
    while (true) {
        fn(y);
        int t = steps - 1;
        while (t >= 0 && ++y[static_cast<std::size_t>(t)] == labels) {
            y[static_cast<std::size_t>(t)] = 0;
            --t;
        }
        if (t < 0) break;
    }
}

inline double brute_log_partition(const CrfInstance& c)
{
    std::vector<double> scores;
    for_each_labeling(static_cast<int>(c.emissions.rows()), static_cast<int>(c.emissions.cols()),
                      [&](const std::vector<int>& y) { scores.push_back(path_score(c, y)); });
    double m = -std::numeric_limits<double>::infinity();
    for (double s : scores) m = std::max(m, s);
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    return m + std::log(sum);
}

struct BestPath {
    std::vector<int> labels;
    double score = -std::numeric_limits<double>::infinity();
};

// First maximum in lexicographic order.
inline BestPath brute_argmax(const CrfInstance& c)
{
    BestPath best;
    for_each_labeling(static_cast<int>(c.emissions.rows()), static_cast<int>(c.emissions.cols()),
                      [&](const std::vector<int>& y) {
                          const double s = path_score(c, y);
                          if (s > best.score) {
                              best.score = s;
                              best.labels = y;
                          }
                      });
    return best;
}

// Among labelings scoring within `tol` of the maximum, the one that is
// smallest when compared from the last step backwards. This is what a
// backtracking decoder that prefers lower indices returns.
inline BestPath brute_argmax_backtrack(const CrfInstance& c, double tol = 1e-9)
{
    const double top = brute_argmax(c).score;
    BestPath best;
    const auto later_smaller = [](const std::vector<int>& a, const std::vector<int>& b) {
        return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
    };
    for_each_labeling(static_cast<int>(c.emissions.rows()), static_cast<int>(c.emissions.cols()),
                      [&](const std::vector<int>& y) {
                          const double s = path_score(c, y);
                          if (s >= top - tol && (best.labels.empty() || later_smaller(y, best.labels))) {
                              best.score = s;
                              best.labels = y;
                          }
                      });
    return best;
}

// Posterior marginals P(y_t = k) by enumeration.
inline Eigen::MatrixXd brute_marginals(const CrfInstance& c)
{
    const double logz = brute_log_partition(c);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(c.emissions.rows(), c.emissions.cols());
    for_each_labeling(static_cast<int>(c.emissions.rows()), static_cast<int>(c.emissions.cols()),
                      [&](const std::vector<int>& y) {
                          const double p = std::exp(path_score(c, y) - logz);
                          for (std::size_t t = 0; t < y.size(); ++t) m(static_cast<int>(t), y[t]) += p;
                      });
    return m;
}

} // namespace oracle
