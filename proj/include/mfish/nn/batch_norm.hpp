#pragma once

#include <cmath>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

/// Per-channel affine normalisation state.
template <class T>
struct BatchNormState {
    Tensor4<T> gamma; ///< (1, C, 1, 1)
    Tensor4<T> beta;  ///< (1, C, 1, 1)
    std::vector<T> running_mean;
    std::vector<T> running_var;
    double momentum = 0.9; ///< weight kept on the running statistic per update
    double epsilon = 1e-5;

    int channels() const { return gamma.c(); }
};

template <class T>
BatchNormState<T> make_batch_norm(int channels, double momentum = 0.9, double epsilon = 1e-5)
{
    if (!(epsilon > 0.0))
        throw ValidationError("batch_norm: epsilon must be positive");
    BatchNormState<T> s;
    s.gamma = Tensor4<T>(1, channels, 1, 1, T(1));
    s.beta = Tensor4<T>(1, channels, 1, 1, T(0));
    s.gamma.enable_grad();
    s.beta.enable_grad();
    s.running_mean.assign(channels, T(0));
    s.running_var.assign(channels, T(1));
    s.momentum = momentum;
    s.epsilon = epsilon;
    return s;
}

/// Values kept from the forward pass for the backward pass.
template <class T>
struct BatchNormCache {
    Mode mode = Mode::infer;
    std::vector<T> inv_std;
    Tensor4<T> normalized; ///< x_hat, train mode only
};

template <class T>
Tensor4<T> batch_norm(const Tensor4<T>& input, BatchNormState<T>& state, Mode mode,
                      BatchNormCache<T>* cache = nullptr)
{
    const int C = input.c();
    if (state.channels() != C)
        throw ValidationError("batch_norm: state has " + std::to_string(state.channels()) + " channels, input has " +
                              std::to_string(C));
    const std::size_t plane = input.shape().plane();
    const std::size_t count = plane * static_cast<std::size_t>(input.n());
    Tensor4<T> out(input.shape());

    std::vector<T> mean(C), inv_std(C);
    if (mode == Mode::train) {
        if (count < 2)
            throw ValidationError("batch_norm: train mode needs at least 2 values per channel");
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int n = 0; n < input.n(); ++n) {
                const T* p = input.plane(n, c);
                for (std::size_t i = 0; i < plane; ++i)
                    s += p[i];
            }
            const double mu = s / static_cast<double>(count);
            double ss = 0.0;
            for (int n = 0; n < input.n(); ++n) {
                const T* p = input.plane(n, c);
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    ss += d * d;
                }
            }
            const double var = ss / static_cast<double>(count);
            mean[c] = static_cast<T>(mu);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + state.epsilon));
            const double unbiased = ss / static_cast<double>(count - 1);
            state.running_mean[c] =
                static_cast<T>(state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mu);
            state.running_var[c] =
                static_cast<T>(state.momentum * state.running_var[c] + (1.0 - state.momentum) * unbiased);
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + state.epsilon));
        }
    }

    Tensor4<T> normalized;
    const bool keep = cache != nullptr && mode == Mode::train;
    if (keep)
        normalized = Tensor4<T>(input.shape());
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < C; ++c) {
            const T* p = input.plane(n, c);
            T* o = out.plane(n, c);
            T* xh = keep ? normalized.plane(n, c) : nullptr;
            const T g = state.gamma[c];
            const T b = state.beta[c];
            for (std::size_t i = 0; i < plane; ++i) {
                const T x = (p[i] - mean[c]) * inv_std[c];
                if (xh)
                    xh[i] = x;
                o[i] = g * x + b;
            }
        }
    if (cache) {
        cache->mode = mode;
        cache->inv_std = std::move(inv_std);
        cache->normalized = std::move(normalized);
    }
    return out;
}

/// Gradient with respect to the input; gamma/beta gradients are accumulated into `state`.
template <class T>
Tensor4<T> batch_norm_backward(const Tensor4<T>& grad_out, BatchNormState<T>& state, const BatchNormCache<T>& cache)
{
    const int C = grad_out.c();
    const std::size_t plane = grad_out.shape().plane();
    const double count = static_cast<double>(plane) * grad_out.n();
    state.gamma.enable_grad();
    state.beta.enable_grad();
    Tensor4<T> grad_in(grad_out.shape());

    if (cache.mode == Mode::infer) {
        // Only gamma scaling survives; the statistics are constants here.
        for (int n = 0; n < grad_out.n(); ++n)
            for (int c = 0; c < C; ++c) {
                const T* dy = grad_out.plane(n, c);
                T* dx = grad_in.plane(n, c);
                const T k = state.gamma[c] * cache.inv_std[c];
                double sb = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    dx[i] = k * dy[i];
                    sb += dy[i];
                }
                state.beta.grad()[c] += static_cast<T>(sb);
            }
        return grad_in;
    }

    require_same_shape(grad_out, cache.normalized, "batch_norm_backward");
    for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < grad_out.n(); ++n) {
            const T* dy = grad_out.plane(n, c);
            const T* xh = cache.normalized.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
            }
        }
        state.beta.grad()[c] += static_cast<T>(sum_dy);
        state.gamma.grad()[c] += static_cast<T>(sum_dy_xhat);
        const double k = static_cast<double>(state.gamma[c]) * cache.inv_std[c];
        const double mean_dy = sum_dy / count;
        const double mean_dy_xhat = sum_dy_xhat / count;
        for (int n = 0; n < grad_out.n(); ++n) {
            const T* dy = grad_out.plane(n, c);
            const T* xh = cache.normalized.plane(n, c);
            T* dx = grad_in.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i)
                dx[i] = static_cast<T>(k * (dy[i] - mean_dy - xh[i] * mean_dy_xhat));
        }
    }
    return grad_in;
}

} // namespace mfish::nn
