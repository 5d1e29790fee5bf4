#pragma once

#include <algorithm>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

/// Stacks tensors with equal N, H, W along the channel axis.
template <class T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& parts)
{
    if (parts.empty())
        throw ValidationError("concat_channels: nothing to concatenate");
    const Shape4 first = parts.front()->shape();
    int channels = 0;
    for (const auto* p : parts) {
        if (p->n() != first.n || p->h() != first.h || p->w() != first.w)
            throw ValidationError("concat_channels: " + to_string(p->shape()) + " incompatible with " +
                                  to_string(first));
        channels += p->c();
    }
    Tensor4<T> out(first.n, channels, first.h, first.w);
    const std::size_t plane = first.plane();
    for (int n = 0; n < first.n; ++n) {
        int c0 = 0;
        for (const auto* p : parts) {
            std::copy_n(p->plane(n, 0), plane * p->c(), out.plane(n, c0));
            c0 += p->c();
        }
    }
    return out;
}

/// Inverse of concat_channels: slices `grad` back into blocks of the given channel counts.
template <class T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& grad, const std::vector<int>& channels)
{
    std::vector<Tensor4<T>> out;
    const std::size_t plane = grad.shape().plane();
    int c0 = 0;
    for (int c : channels) {
        Tensor4<T> part(grad.n(), c, grad.h(), grad.w());
        for (int n = 0; n < grad.n(); ++n)
            std::copy_n(grad.plane(n, c0), plane * c, part.plane(n, 0));
        c0 += c;
        out.push_back(std::move(part));
    }
    if (c0 != grad.c())
        throw ValidationError("split_channels: channel counts do not add up");
    return out;
}

} // namespace mfish::nn
