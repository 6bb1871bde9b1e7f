#include "ecpe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ecpe {

GradcheckResult gradcheck(const std::function<double()>& loss_fn, const ParameterList& params,
                          double epsilon, double floor)
{
    zero_grads(params);
    loss_fn();
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (const Parameter* p : params) {
        analytic.push_back(p->grad);
    }

    GradcheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        for (Index i = 0; i < p.value.size(); ++i) {
            double& x = p.value.data()[i];
            const double saved = x;
            x = saved + epsilon;
            const double up = loss_fn();
            x = saved - epsilon;
            const double down = loss_fn();
            x = saved;

            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = analytic[pi].data()[i];
            const double err = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), floor});
            if (result.worst_index < 0 || err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = p.name;
                result.worst_index = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    zero_grads(params);
    return result;
}

} // namespace ecpe
