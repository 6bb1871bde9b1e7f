#include "ecpe_tools/commands.hpp"

#include "ecpe/crf.hpp"
#include "ecpe/gradcheck.hpp"
#include "ecpe/losses.hpp"
#include "ecpe/metrics.hpp"

#include <cmath>
#include <limits>

namespace ecpe::cli {

namespace {

struct Enumerated {
    double log_partition = 0.0;
    std::vector<int> best;
    double best_score = -std::numeric_limits<double>::infinity();
};

// Scores every one of K^T labelings directly from the arrays.
Enumerated enumerate(const Matrix& e, const crf::CrfParams& p)
{
    const int steps = static_cast<int>(e.rows());
    const int k = static_cast<int>(e.cols());
    std::vector<int> y(static_cast<std::size_t>(steps), 0);
    std::vector<double> scores;
    Enumerated out;
    while (true) {
        double s = p.start(y.front()) + p.end(y.back());
        for (int t = 0; t < steps; ++t) {
            s += e(t, y[static_cast<std::size_t>(t)]);
            if (t > 0) s += p.transitions(y[static_cast<std::size_t>(t - 1)], y[static_cast<std::size_t>(t)]);
        }
        scores.push_back(s);
        if (s > out.best_score) {
            out.best_score = s;
            out.best = y;
        }
        int t = steps - 1;
        while (t >= 0 && ++y[static_cast<std::size_t>(t)] == k) {
            y[static_cast<std::size_t>(t--)] = 0;
        }
        if (t < 0) break;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (double s : scores) m = std::max(m, s);
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    out.log_partition = m + std::log(sum);
    return out;
}

Matrix normal(Index r, Index c, Rng& rng, double scale = 1.0)
{
    Matrix m(r, c);
    fill_normal(m, scale, rng);
    return m;
}

class Checks {
public:
    explicit Checks(Logger& log) : log_(log) {}

    void report(const std::string& name, bool ok, const nlohmann::json& detail)
    {
        log_.write({{"event", "check"}, {"name", name}, {"passed", ok}, {"detail", detail}});
        failures_ += ok ? 0 : 1;
    }

    int failures() const { return failures_; }

private:
    Logger& log_;
    int failures_ = 0;
};

void crf_oracle(Checks& checks)
{
    Rng rng(20240);
    double worst_z = 0.0, worst_score = 0.0;
    int label_mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        const int t = 1 + i % 4;
        const int k = 2 + (i / 4) % 2;
        const Matrix e = normal(t, k, rng, 2.0);
        const crf::CrfParams p{normal(k, k, rng), normal(k, 1, rng).col(0), normal(k, 1, rng).col(0)};
        const Enumerated ref = enumerate(e, p);
        const auto v = crf::viterbi(e, p);
        worst_z = std::max(worst_z, std::abs(crf::log_partition(e, p) - ref.log_partition));
        worst_score = std::max(worst_score, std::abs(v.score - ref.best_score));
        label_mismatches += v.labels != ref.best;
    }
    checks.report("crf_log_partition_vs_enumeration", worst_z <= 1e-8, {{"max_abs_error", worst_z}});
    checks.report("crf_viterbi_vs_enumeration", worst_score <= 1e-8 && label_mismatches == 0,
                  {{"max_abs_score_error", worst_score}, {"label_mismatches", label_mismatches}});
}

void gradients(Checks& checks)
{
    Rng rng(77);
    const auto record = [&](const std::string& name, const GradcheckResult& r, double tol) {
        checks.report(name, r.max_relative_error < tol,
                      {{"max_relative_error", r.max_relative_error}, {"tolerance", tol},
                       {"worst_parameter", r.worst_parameter}});
    };

    {
        Parameter e("emissions", 4, 3), a("transitions", 3, 3), s("start", 3, 1), f("end", 3, 1);
        for (Parameter* p : {&e, &a, &s, &f}) fill_normal(p->value, 1.0, rng);
        const std::vector<int> y{1, 0, 2, 2};
        record("gradcheck_crf",
               gradcheck([&] {
                   const crf::CrfParams p{a.value, s.value.col(0), f.value.col(0)};
                   const auto g = crf::gradients(e.value, p, y);
                   e.grad += g.emissions;
                   a.grad += g.transitions;
                   s.grad += g.start;
                   f.grad += g.end;
                   return crf::nll(e.value, p, y);
               }, {&e, &a, &s, &f}),
               1e-6);
    }
    {
        Dense d("head", 5, 7);
        d.init(rng);
        const Matrix x = normal(6, 5, rng);
        const std::vector<int> y{0, 1, 4, 4, 6, 2};
        const Vector w = (normal(7, 1, rng).array().abs() + 0.2).matrix();
        record("gradcheck_weighted_ce_head", gradcheck([&] {
                   const auto lg = weighted_cross_entropy_mean(d.forward(x), y, w);
                   d.backward(x, lg.grad);
                   return lg.loss;
               }, d.parameters()),
               1e-4);
    }
    {
        Dense d("head", 5, 1);
        d.init(rng);
        const Matrix x = normal(6, 5, rng);
        const std::vector<int> y{0, 1, 1, 0, 0, 1};
        record("gradcheck_bce_head", gradcheck([&] {
                   const auto lg = binary_cross_entropy_mean(d.forward(x), y);
                   d.backward(x, lg.grad);
                   return lg.loss;
               }, d.parameters()),
               1e-4);
    }
    {
        PairingModel m({4, 3, 3, 5, 0.5});
        m.init(rng);
        PairBatch b{normal(10, 4, rng), normal(10, 3, rng), {}, {}};
        for (int i = 0; i < 10; ++i) {
            b.distances.push_back(i - 5);
            b.labels.push_back(i % 2);
        }
        record("gradcheck_pairing_head", gradcheck([&] { return m.accumulate_gradients(b); }, m.parameters()), 1e-4);
    }
    {
        EmotionModelConfig c;
        c.variant = EmotionVariant::bilstm;
        c.input_width = 5;
        c.hidden = 8;
        c.num_layers = 4;
        EmotionModel m(c);
        m.init(rng);
        const Matrix x = normal(6, 5, rng);
        const std::vector<int> y{3, 3, 0, 4, 6, 1};
        record("gradcheck_emotion_bilstm_4_layers",
               gradcheck([&] { return m.accumulate_gradients(x, y, Vector::Ones(7), nullptr); }, m.parameters()),
               1e-4);
    }
}

void metric_fixtures(Checks& checks)
{
    {
        const std::vector<int> gold{0, 0, 1, 1}, pred{0, 1, 1, 1};
        const double f1 = eval::stage_metrics(pred, gold, 2).weighted_f1;
        checks.report("stage_metrics_fixture", std::abs(f1 - (0.5 * 2.0 / 3.0 + 0.5 * 0.8)) < 1e-12,
                      {{"weighted_f1", f1}});
    }
    {
        using eval::ScoredPair;
        const std::vector<ScoredPair> gold{{1, {3, Emotion::joy, 2}}, {1, {3, Emotion::joy, 3}},
                                           {1, {5, Emotion::anger, 5}}};
        const std::vector<ScoredPair> pred{{1, {3, Emotion::joy, 2}}, {1, {5, Emotion::anger, 4}}};
        const auto m = eval::pair_metrics(pred, gold);
        checks.report("pair_metrics_fixture",
                      std::abs(m.weighted_f1 - 4.0 / 9.0) < 1e-12 && std::abs(m.macro_f1 - 1.0 / 3.0) < 1e-12,
                      {{"weighted_f1", m.weighted_f1}, {"macro_f1", m.macro_f1}});
        const auto self = eval::pair_metrics(gold, gold);
        checks.report("pair_metrics_gold_vs_gold", self.weighted_f1 == 1.0 && self.macro_f1 == 1.0,
                      {{"weighted_f1", self.weighted_f1}, {"macro_f1", self.macro_f1}});
    }
}

} // namespace

int cmd_selfcheck(Logger& log)
{
    log.write({{"event", "start"}, {"command", "selfcheck"}});
    Checks checks(log);
    crf_oracle(checks);
    gradients(checks);
    metric_fixtures(checks);
    log.write({{"event", "selfcheck_done"}, {"failures", checks.failures()}});
    return checks.failures() == 0 ? 0 : 1;
}

} // namespace ecpe::cli
