#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates, one pair of buffers per parameter tensor.
template <class T>
struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
};

namespace detail {

template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, std::vector<T>& m, std::vector<T>& v,
                 const AdamConfig& cfg, double bias1, double bias2)
{
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double m_hat = mi / bias1;
        const double v_hat = vi / bias2;
        param[i] = static_cast<T>(param[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
}

} // namespace detail

/// One bias-corrected Adam step over parallel lists of parameters and gradients.
/// Moment buffers are created on the first call; `state.step` is incremented once.
template <class T>
void adam_step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads, AdamState<T>& state)
{
    if (params.size() != grads.size())
        throw ValidationError("adam_step: parameter and gradient lists differ in length");
    if (state.m.empty() && state.step == 0) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), T(0));
            state.v.emplace_back(p.size(), T(0));
        }
    }
    if (state.m.size() != params.size())
        throw ValidationError("adam_step: optimizer state tracks a different number of parameters");
    for (std::size_t k = 0; k < params.size(); ++k)
        if (params[k].size() != grads[k].size() || state.m[k].size() != params[k].size() ||
            state.v[k].size() != params[k].size())
            throw ValidationError("adam_step: shape mismatch for parameter " + std::to_string(k));

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(state.config.beta1, t);
    const double bias2 = 1.0 - std::pow(state.config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k)
        detail::adam_update(params[k], grads[k], state.m[k], state.v[k], state.config, bias1, bias2);
}

/// Convenience overload for tensors carrying their own gradient buffers.
template <class T>
void adam_step(std::span<Tensor4<T>* const> tensors, AdamState<T>& state)
{
    std::vector<std::span<T>> params;
    std::vector<std::span<const T>> grads;
    params.reserve(tensors.size());
    grads.reserve(tensors.size());
    for (auto* t : tensors) {
        if (!t->has_grad())
            throw ValidationError("adam_step: parameter has no gradient buffer");
        params.push_back(t->values());
        grads.push_back(std::as_const(*t).grad());
    }
    adam_step<T>(std::span<const std::span<T>>(params), std::span<const std::span<const T>>(grads), state);
}

} // namespace mfish::nn
