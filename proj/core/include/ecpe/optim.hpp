#pragma once

#include "ecpe/tensor.hpp"

#include <cstdint>
#include <vector>

namespace ecpe {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay, bias-corrected moments.
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    const AdamWConfig& config() const { return config_; }
    std::int64_t step_count() const { return step_; }

    // Applies one update to every parameter from its grad. `lr` overrides the
    // configured rate (used by the schedule). Throws NumericError naming the
    // first parameter with a non-finite gradient, before touching anything.
    void step(const ParameterList& params, double lr);
    void step(const ParameterList& params) { step(params, config_.lr); }

    // Moments are exposed for checkpointing; they are created lazily.
    std::vector<Matrix>& first_moments() { return m_; }
    std::vector<Matrix>& second_moments() { return v_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }
    void set_step_count(std::int64_t s) { step_ = s; }

private:
    AdamWConfig config_;
    std::int64_t step_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

// Linear ramp 0 -> peak over warmup_steps, then linear decay to 0 at total_steps.
struct WarmupSchedule {
    std::int64_t warmup_steps = 0;
    std::int64_t total_steps = 1;
    double peak_lr = 1e-3;

    static WarmupSchedule from_fraction(std::int64_t total_steps, double warmup_fraction,
                                        double peak_lr);

    double lr_at(std::int64_t step) const;
};

} // namespace ecpe
