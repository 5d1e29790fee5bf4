#pragma once

#include <algorithm>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

namespace detail {

struct LerpTap {
    int i0;
    int i1;
    double frac; ///< weight of i1
};

// Align-corners sampling: output 0 maps to input 0 and output (out-1) to input (in-1).
inline std::vector<LerpTap> align_corner_taps(int in, int out)
{
    std::vector<LerpTap> taps(out);
    for (int o = 0; o < out; ++o) {
        const double src = out > 1 ? static_cast<double>(o) * (in - 1) / (out - 1) : 0.0;
        int i0 = std::min(static_cast<int>(src), in - 1);
        const int i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, src - i0};
    }
    return taps;
}

} // namespace detail

/// Separable bilinear interpolation with the align-corners convention.
template <class T>
Tensor4<T> bilinear_upsample(const Tensor4<T>& input, int out_h, int out_w)
{
    if (out_h < input.h() || out_w < input.w())
        throw ValidationError("bilinear_upsample: output must not be smaller than the input");
    const auto ty = detail::align_corner_taps(input.h(), out_h);
    const auto tx = detail::align_corner_taps(input.w(), out_w);
    Tensor4<T> out(input.n(), input.c(), out_h, out_w);
    std::vector<T> row(static_cast<std::size_t>(out_w) * input.h());
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c) {
            const T* src = input.plane(n, c);
            // Horizontal pass into `row` (input.h() x out_w), then vertical.
            for (int y = 0; y < input.h(); ++y)
                for (int x = 0; x < out_w; ++x) {
                    const auto& t = tx[x];
                    const T a = src[y * input.w() + t.i0];
                    const T b = src[y * input.w() + t.i1];
                    row[static_cast<std::size_t>(y) * out_w + x] = a + static_cast<T>(t.frac) * (b - a);
                }
            T* dst = out.plane(n, c);
            for (int y = 0; y < out_h; ++y) {
                const auto& t = ty[y];
                const T* r0 = row.data() + static_cast<std::size_t>(t.i0) * out_w;
                const T* r1 = row.data() + static_cast<std::size_t>(t.i1) * out_w;
                const T f = static_cast<T>(t.frac);
                for (int x = 0; x < out_w; ++x)
                    dst[static_cast<std::size_t>(y) * out_w + x] = r0[x] + f * (r1[x] - r0[x]);
            }
        }
    return out;
}

/// Transpose of the interpolation operator.
template <class T>
Tensor4<T> bilinear_upsample_backward(const Tensor4<T>& grad_out, int in_h, int in_w)
{
    const auto ty = detail::align_corner_taps(in_h, grad_out.h());
    const auto tx = detail::align_corner_taps(in_w, grad_out.w());
    Tensor4<T> grad_in(grad_out.n(), grad_out.c(), in_h, in_w);
    const int out_w = grad_out.w();
    std::vector<T> row(static_cast<std::size_t>(out_w) * in_h);
    for (int n = 0; n < grad_out.n(); ++n)
        for (int c = 0; c < grad_out.c(); ++c) {
            std::fill(row.begin(), row.end(), T(0));
            const T* g = grad_out.plane(n, c);
            for (int y = 0; y < grad_out.h(); ++y) {
                const auto& t = ty[y];
                const T f = static_cast<T>(t.frac);
                T* r0 = row.data() + static_cast<std::size_t>(t.i0) * out_w;
                T* r1 = row.data() + static_cast<std::size_t>(t.i1) * out_w;
                for (int x = 0; x < out_w; ++x) {
                    const T v = g[static_cast<std::size_t>(y) * out_w + x];
                    r0[x] += (T(1) - f) * v;
                    r1[x] += f * v;
                }
            }
            T* dst = grad_in.plane(n, c);
            for (int y = 0; y < in_h; ++y)
                for (int x = 0; x < out_w; ++x) {
                    const auto& t = tx[x];
                    const T v = row[static_cast<std::size_t>(y) * out_w + x];
                    const T f = static_cast<T>(t.frac);
                    dst[y * in_w + t.i0] += (T(1) - f) * v;
                    dst[y * in_w + t.i1] += f * v;
                }
        }
    return grad_in;
}

/// Zero-pads on the bottom and right edges.
template <class T>
Tensor4<T> pad_bottom_right(const Tensor4<T>& input, int h, int w)
{
    if (h == input.h() && w == input.w())
        return input;
    if (h < input.h() || w < input.w())
        throw ValidationError("pad_bottom_right: target smaller than input");
    Tensor4<T> out(input.n(), input.c(), h, w);
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c)
            for (int y = 0; y < input.h(); ++y)
                std::copy_n(input.plane(n, c) + static_cast<std::size_t>(y) * input.w(), input.w(),
                            out.plane(n, c) + static_cast<std::size_t>(y) * w);
    return out;
}

/// Keeps the top-left h x w window.
template <class T>
Tensor4<T> crop_top_left(const Tensor4<T>& input, int h, int w)
{
    if (h == input.h() && w == input.w())
        return input;
    if (h > input.h() || w > input.w())
        throw ValidationError("crop_top_left: window larger than input");
    Tensor4<T> out(input.n(), input.c(), h, w);
    for (int n = 0; n < input.n(); ++n)
        for (int c = 0; c < input.c(); ++c)
            for (int y = 0; y < h; ++y)
                std::copy_n(input.plane(n, c) + static_cast<std::size_t>(y) * input.w(), w,
                            out.plane(n, c) + static_cast<std::size_t>(y) * w);
    return out;
}

} // namespace mfish::nn
