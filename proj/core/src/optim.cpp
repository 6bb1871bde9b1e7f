#include "ecpe/optim.hpp"

#include "ecpe/error.hpp"

#include <algorithm>
#include <cmath>

namespace ecpe {

void AdamW::step(const ParameterList& params, double lr)
{
    for (const Parameter* p : params) {
        if (!p->grad.allFinite()) {
            throw NumericError("non-finite gradient in parameter '" + p->name + "'");
        }
    }
    if (m_.size() != params.size()) {
        m_.clear();
        v_.clear();
        for (const Parameter* p : params) {
            m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }

    ++step_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (m_[i].rows() != p.value.rows() || m_[i].cols() != p.value.cols()) {
            throw ShapeError("optimizer state does not match parameter '" + p.name + "'");
        }
        if (config_.weight_decay != 0.0) {
            p.value *= 1.0 - lr * config_.weight_decay;
        }
        m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
        v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
        p.value.array() -= lr * (m_[i].array() / bias1) /
                           ((v_[i].array() / bias2).sqrt() + config_.eps);
    }
}

WarmupSchedule WarmupSchedule::from_fraction(std::int64_t total_steps, double warmup_fraction,
                                             double peak_lr)
{
    WarmupSchedule s;
    s.total_steps = std::max<std::int64_t>(total_steps, 1);
    s.warmup_steps = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::llround(warmup_fraction * static_cast<double>(s.total_steps))),
        0, s.total_steps);
    s.peak_lr = peak_lr;
    return s;
}

double WarmupSchedule::lr_at(std::int64_t step) const
{
    step = std::clamp<std::int64_t>(step, 0, total_steps);
    if (step < warmup_steps) {
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    if (total_steps == warmup_steps) {
        return peak_lr;
    }
    return peak_lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup_steps);
}

} // namespace ecpe
