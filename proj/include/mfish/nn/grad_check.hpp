#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfish/core/random.hpp"
#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

struct GradCheckReport {
    std::vector<double> per_input; ///< max relative error for each input tensor
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares analytic gradients against central finite differences.
///
/// `loss(inputs)` returns a scalar; `analytic(inputs)` returns one gradient
/// tensor per input. The error for an input is
/// max|analytic - numeric| / max(max|analytic|, max|numeric|).
template <class LossFn, class GradFn>
GradCheckReport grad_check(LossFn&& loss, GradFn&& analytic, std::vector<Tensor4<double>> inputs, double tolerance,
                           double step = 1e-5)
{
    const auto grads = analytic(std::as_const(inputs));
    if (grads.size() != inputs.size())
        throw ValidationError("grad_check: analytic gradient count differs from input count");

    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        require_same_shape(inputs[k], grads[k], "grad_check");
        double max_diff = 0.0, scale = 1e-12;
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double saved = inputs[k][i];
            inputs[k][i] = saved + step;
            const double up = loss(std::as_const(inputs));
            inputs[k][i] = saved - step;
            const double down = loss(std::as_const(inputs));
            inputs[k][i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            max_diff = std::max(max_diff, std::abs(numeric - grads[k][i]));
            scale = std::max({scale, std::abs(numeric), std::abs(grads[k][i])});
        }
        report.per_input.push_back(max_diff / scale);
        report.max_rel_error = std::max(report.max_rel_error, report.per_input.back());
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

template <class T>
Tensor4<T> random_tensor(Shape4 shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor4<T> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <class T>
double dot(const Tensor4<T>& a, const Tensor4<T>& b)
{
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<double>(a[i]) * b[i];
    return s;
}

} // namespace mfish::nn
