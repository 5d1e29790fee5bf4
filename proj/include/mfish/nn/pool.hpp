#pragma once

#include <cstdint>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

template <class T>
struct MaxPoolResult {
    Tensor4<T> output;
    std::vector<std::uint32_t> argmax; ///< flat index into the input, one per output element
};

/// Window maximum. The recorded argmax is the first maximal element in
/// row-major window order, so gradients on ties go there.
template <class T>
MaxPoolResult<T> max_pool(const Tensor4<T>& input, int pool_size, int stride)
{
    if (pool_size <= 0 || stride <= 0)
        throw ValidationError("max_pool: pool size and stride must be positive");
    if (input.h() < pool_size || input.w() < pool_size)
        throw ValidationError("max_pool: input " + to_string(input.shape()) + " smaller than pool size " +
                              std::to_string(pool_size));
    const int oh = (input.h() - pool_size) / stride + 1;
    const int ow = (input.w() - pool_size) / stride + 1;
    MaxPoolResult<T> r{Tensor4<T>(input.n(), input.c(), oh, ow), {}};
    r.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x, ++o) {
                    std::size_t best = input.offset(n, c, y * stride, x * stride);
                    T best_v = input[best];
                    for (int dy = 0; dy < pool_size; ++dy)
                        for (int dx = 0; dx < pool_size; ++dx) {
                            const auto idx = input.offset(n, c, y * stride + dy, x * stride + dx);
                            if (input[idx] > best_v) {
                                best_v = input[idx];
                                best = idx;
                            }
                        }
                    r.output[o] = best_v;
                    r.argmax[o] = static_cast<std::uint32_t>(best);
                }
    return r;
}

template <class T>
Tensor4<T> max_pool_backward(const Tensor4<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                             const Shape4& input_shape)
{
    if (argmax.size() != grad_out.size())
        throw ValidationError("max_pool_backward: argmax does not match gradient");
    Tensor4<T> grad_in(input_shape);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        grad_in[argmax[i]] += grad_out[i];
    return grad_in;
}

/// Mean over H x W, producing N x C x 1 x 1.
template <class T>
Tensor4<T> global_avg_pool(const Tensor4<T>& input)
{
    Tensor4<T> out(input.n(), input.c(), 1, 1);
    const auto plane = input.shape().plane();
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c) {
            const T* p = input.plane(n, c);
            T s = T(0);
            for (std::size_t i = 0; i < plane; ++i)
                s += p[i];
            out(n, c, 0, 0) = s / static_cast<T>(plane);
        }
    return out;
}

template <class T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& grad_out, const Shape4& input_shape)
{
    Tensor4<T> grad_in(input_shape);
    const auto plane = input_shape.plane();
    for (int n = 0; n < input_shape.n; ++n)
        for (int c = 0; c < input_shape.c; ++c) {
            const T g = grad_out(n, c, 0, 0) / static_cast<T>(plane);
            T* p = grad_in.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i)
                p[i] = g;
        }
    return grad_in;
}

/// Replicates an N x C x 1 x 1 tensor over an H x W grid.
template <class T>
Tensor4<T> broadcast_spatial(const Tensor4<T>& input, int h, int w)
{
    if (input.h() != 1 || input.w() != 1)
        throw ValidationError("broadcast_spatial: input must be N x C x 1 x 1");
    Tensor4<T> out(input.n(), input.c(), h, w);
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c) {
            T* p = out.plane(n, c);
            std::fill(p, p + out.shape().plane(), input(n, c, 0, 0));
        }
    return out;
}

template <class T>
Tensor4<T> broadcast_spatial_backward(const Tensor4<T>& grad_out)
{
    Tensor4<T> g(grad_out.n(), grad_out.c(), 1, 1);
    for (int n = 0; n < grad_out.n(); ++n)
        for (int c = 0; c < grad_out.c(); ++c) {
            const T* p = grad_out.plane(n, c);
            T s = T(0);
            for (std::size_t i = 0; i < grad_out.shape().plane(); ++i)
                s += p[i];
            g(n, c, 0, 0) = s;
        }
    return g;
}

} // namespace mfish::nn
