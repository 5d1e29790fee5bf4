#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

/// Per-pixel softmax over the channel axis, max-subtracted.
template <class T>
Tensor4<T> softmax_channels(const Tensor4<T>& logits)
{
    Tensor4<T> out(logits.shape());
    const std::size_t plane = logits.shape().plane();
    for (int n = 0; n < logits.n(); ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            T m = -std::numeric_limits<T>::infinity();
            for (int c = 0; c < logits.c(); ++c)
                m = std::max(m, logits.plane(n, c)[i]);
            T s = T(0);
            for (int c = 0; c < logits.c(); ++c) {
                const T e = std::exp(logits.plane(n, c)[i] - m);
                out.plane(n, c)[i] = e;
                s += e;
            }
            for (int c = 0; c < logits.c(); ++c)
                out.plane(n, c)[i] /= s;
        }
    return out;
}

/// Vector-Jacobian product of the softmax: dz_c = p_c (dp_c - sum_j p_j dp_j).
template <class T>
Tensor4<T> softmax_backward(const Tensor4<T>& probs, const Tensor4<T>& grad_probs)
{
    require_same_shape(probs, grad_probs, "softmax_backward");
    Tensor4<T> grad(probs.shape());
    const std::size_t plane = probs.shape().plane();
    for (int n = 0; n < probs.n(); ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            T dot = T(0);
            for (int c = 0; c < probs.c(); ++c)
                dot += probs.plane(n, c)[i] * grad_probs.plane(n, c)[i];
            for (int c = 0; c < probs.c(); ++c)
                grad.plane(n, c)[i] = probs.plane(n, c)[i] * (grad_probs.plane(n, c)[i] - dot);
        }
    return grad;
}

template <class T>
struct LossResult {
    T loss = T(0);
    Tensor4<T> grad;       ///< gradient w.r.t. the loss input (probabilities or logits)
    std::size_t count = 0; ///< number of masked-in pixels
};

namespace detail {

template <class T>
void check_loss_shapes(const Tensor4<T>& pred, const Tensor4<T>& target, const Tensor4<T>& mask)
{
    require_same_shape(pred, target, "cross entropy");
    if (mask.shape() != Shape4{pred.n(), 1, pred.h(), pred.w()})
        throw ValidationError("cross entropy: mask must be N x 1 x H x W, got " + to_string(mask.shape()));
}

template <class T>
std::size_t masked_count(const Tensor4<T>& mask)
{
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] != T(0))
            ++count;
    if (count == 0)
        throw ValidationError("cross entropy: mask selects no pixels, mean loss undefined");
    return count;
}

} // namespace detail

/// Mean over masked-in pixels of -sum_c target_c log(pred_c).
/// Pixels with mask 0 contribute nothing and receive an exactly zero gradient.
template <class T>
LossResult<T> masked_cross_entropy(const Tensor4<T>& pred, const Tensor4<T>& target, const Tensor4<T>& mask)
{
    detail::check_loss_shapes(pred, target, mask);
    LossResult<T> r;
    r.count = detail::masked_count(mask);
    r.grad = Tensor4<T>(pred.shape());
    const std::size_t plane = pred.shape().plane();
    const double inv_count = 1.0 / static_cast<double>(r.count);
    double total = 0.0;
    for (int n = 0; n < pred.n(); ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            if (mask.plane(n, 0)[i] == T(0))
                continue;
            for (int c = 0; c < pred.c(); ++c) {
                const T t = target.plane(n, c)[i];
                if (t == T(0))
                    continue;
                const T q = pred.plane(n, c)[i];
                total -= static_cast<double>(t) * std::log(static_cast<double>(q));
                r.grad.plane(n, c)[i] = static_cast<T>(-static_cast<double>(t) / q * inv_count);
            }
        }
    r.loss = static_cast<T>(total * inv_count);
    return r;
}

/// Softmax followed by masked cross entropy, evaluated from logits with a
/// log-sum-exp. The returned gradient is with respect to the logits.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, const Tensor4<T>& target, const Tensor4<T>& mask)
{
    detail::check_loss_shapes(logits, target, mask);
    LossResult<T> r;
    r.count = detail::masked_count(mask);
    r.grad = Tensor4<T>(logits.shape());
    const std::size_t plane = logits.shape().plane();
    const int C = logits.c();
    const double inv_count = 1.0 / static_cast<double>(r.count);
    double total = 0.0;
    std::vector<double> p(C);
    for (int n = 0; n < logits.n(); ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            if (mask.plane(n, 0)[i] == T(0))
                continue;
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c)
                m = std::max(m, static_cast<double>(logits.plane(n, c)[i]));
            double s = 0.0;
            for (int c = 0; c < C; ++c) {
                p[c] = std::exp(static_cast<double>(logits.plane(n, c)[i]) - m);
                s += p[c];
            }
            const double lse = m + std::log(s);
            double t_sum = 0.0;
            for (int c = 0; c < C; ++c) {
                const double t = target.plane(n, c)[i];
                t_sum += t;
                if (t != 0.0)
                    total -= t * (static_cast<double>(logits.plane(n, c)[i]) - lse);
            }
            for (int c = 0; c < C; ++c)
                r.grad.plane(n, c)[i] =
                    static_cast<T>((p[c] / s * t_sum - static_cast<double>(target.plane(n, c)[i])) * inv_count);
        }
    r.loss = static_cast<T>(total * inv_count);
    return r;
}

} // namespace mfish::nn
