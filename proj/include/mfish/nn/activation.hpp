#pragma once

#include <vector>

#include "mfish/core/random.hpp"
#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

template <class T>
Tensor4<T> relu(const Tensor4<T>& input)
{
    Tensor4<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i)
        out[i] = input[i] < T(0) ? T(0) : input[i]; // NaN passes through
    return out;
}

/// `reference` may be either the ReLU input or its output: both are positive
/// exactly where the unit was active. The subgradient at 0 is 0.
template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& reference, const Tensor4<T>& grad_out)
{
    require_same_shape(reference, grad_out, "relu_backward");
    Tensor4<T> grad_in(grad_out.shape());
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        grad_in[i] = reference[i] > T(0) ? grad_out[i] : T(0);
    return grad_in;
}

template <class T>
struct DropoutResult {
    Tensor4<T> output;
    std::vector<T> scale; ///< per-element multiplier, empty when dropout was the identity
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) so that inference is the identity.
template <class T>
DropoutResult<T> dropout(const Tensor4<T>& input, double rate, Mode mode, Rng& rng)
{
    if (!(rate >= 0.0) || rate >= 1.0)
        throw ValidationError("dropout: rate must lie in [0, 1)");
    if (mode == Mode::infer || rate == 0.0)
        return {input, {}};
    DropoutResult<T> r{Tensor4<T>(input.shape()), std::vector<T>(input.size())};
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < input.size(); ++i) {
        const T s = rng.uniform() < rate ? T(0) : keep_scale;
        r.scale[i] = s;
        r.output[i] = input[i] * s;
    }
    return r;
}

template <class T>
Tensor4<T> dropout_backward(const Tensor4<T>& grad_out, const std::vector<T>& scale)
{
    if (scale.empty())
        return grad_out;
    if (scale.size() != grad_out.size())
        throw ValidationError("dropout_backward: mask does not match gradient");
    Tensor4<T> grad_in(grad_out.shape());
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        grad_in[i] = grad_out[i] * scale[i];
    return grad_in;
}

} // namespace mfish::nn
