#pragma once

#include "ecpe/tensor.hpp"

#include <functional>

namespace ecpe {

struct GradcheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    Index worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// `loss_fn` must return the loss and accumulate analytic gradients into the
// parameters' grad arrays; it has to be deterministic. Every entry of every
// parameter is compared against a central difference with step `epsilon`.
// Relative error is |a - n| / max(|a|, |n|, floor). The floor keeps entries
// near zero from being judged on central-difference roundoff, which is about
// 1e-16 * |loss| / epsilon.
GradcheckResult gradcheck(const std::function<double()>& loss_fn, const ParameterList& params,
                          double epsilon = 1e-5, double floor = 1e-6);

} // namespace ecpe
