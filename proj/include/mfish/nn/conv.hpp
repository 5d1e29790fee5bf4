#pragma once

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "mfish/nn/gemm.hpp"
#include "mfish/nn/tensor.hpp"

namespace mfish::nn {

enum class Padding { same, valid };

/// Weights and geometry of a dilated 2-D convolution.
///
/// The kernel is applied in convolution orientation: with a centred tap index
/// t in [-r, r], output(y) = bias + sum_t input(y - dilation * t) * weight(t),
/// which is the sum over s + l*t = y of f(s) k(t). For dilation 1 this is the
/// ordinary discrete convolution.
template <class T>
struct ConvParams {
    Tensor4<T> weight; ///< (C_out, C_in, k_h, k_w)
    Tensor4<T> bias;   ///< (1, C_out, 1, 1)
    int dilation = 1;
    int stride = 1;
    Padding padding = Padding::same;

    int out_channels() const { return weight.n(); }
    int in_channels() const { return weight.c(); }
    int kernel_h() const { return weight.h(); }
    int kernel_w() const { return weight.w(); }
    int receptive_field_h() const { return kernel_h() + (kernel_h() - 1) * (dilation - 1); }
    int receptive_field_w() const { return kernel_w() + (kernel_w() - 1) * (dilation - 1); }
};

template <class T>
ConvParams<T> make_conv_params(int in_channels, int out_channels, int kernel, int dilation = 1, int stride = 1,
                               Padding padding = Padding::same)
{
    if (dilation <= 0)
        throw ValidationError("conv2d: dilation must be positive");
    if (stride <= 0)
        throw ValidationError("conv2d: stride must be positive");
    ConvParams<T> p;
    p.weight = Tensor4<T>(out_channels, in_channels, kernel, kernel);
    p.bias = Tensor4<T>(1, out_channels, 1, 1);
    p.weight.enable_grad();
    p.bias.enable_grad();
    p.dilation = dilation;
    p.stride = stride;
    p.padding = padding;
    return p;
}

struct ConvGeometry {
    int out_h = 0;
    int out_w = 0;
    int pad_h = 0;
    int pad_w = 0;
};

template <class T>
ConvGeometry conv_geometry(const ConvParams<T>& p, int in_h, int in_w)
{
    if (p.dilation <= 0)
        throw ValidationError("conv2d: dilation must be positive");
    if (p.stride <= 0)
        throw ValidationError("conv2d: stride must be positive");
    ConvGeometry g;
    if (p.padding == Padding::same) {
        if (p.kernel_h() % 2 == 0 || p.kernel_w() % 2 == 0)
            throw ValidationError("conv2d: same padding requires odd kernel sizes");
        g.pad_h = p.dilation * (p.kernel_h() - 1) / 2;
        g.pad_w = p.dilation * (p.kernel_w() - 1) / 2;
    }
    g.out_h = (in_h + 2 * g.pad_h - p.dilation * (p.kernel_h() - 1) - 1) / p.stride + 1;
    g.out_w = (in_w + 2 * g.pad_w - p.dilation * (p.kernel_w() - 1) - 1) / p.stride + 1;
    if (g.out_h <= 0 || g.out_w <= 0)
        throw ValidationError("conv2d: input smaller than the receptive field");
    return g;
}

namespace detail {

struct ColumnSpan {
    int lo;
    int hi; // exclusive
};

// Output positions o in [0, out) whose input index o*stride + offset lies in [0, extent).
inline ColumnSpan valid_span(int offset, int stride, int extent, int out)
{
    int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    int hi = extent - 1 - offset < 0 ? 0 : (extent - 1 - offset) / stride + 1;
    lo = std::clamp(lo, 0, out);
    hi = std::clamp(hi, lo, out);
    return {lo, hi};
}

template <class T>
void im2col(const T* in, int channels, int h, int w, int kh, int kw, int dilation, int stride, const ConvGeometry& g,
            T* col)
{
    const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;
    for (int c = 0; c < channels; ++c) {
        const T* src = in + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            const int off_y = -g.pad_h + dilation * (kh - 1 - ky);
            const auto ys = valid_span(off_y, stride, h, g.out_h);
            for (int kx = 0; kx < kw; ++kx) {
                const int off_x = -g.pad_w + dilation * (kw - 1 - kx);
                const auto xs = valid_span(off_x, stride, w, g.out_w);
                T* row = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * out_plane;
                std::fill(row, row + out_plane, T(0));
                for (int oy = ys.lo; oy < ys.hi; ++oy) {
                    const T* s = src + static_cast<std::size_t>(oy * stride + off_y) * w;
                    T* d = row + static_cast<std::size_t>(oy) * g.out_w;
                    if (stride == 1) {
                        if (xs.hi > xs.lo)
                            std::memcpy(d + xs.lo, s + xs.lo + off_x, sizeof(T) * (xs.hi - xs.lo));
                    } else {
                        for (int ox = xs.lo; ox < xs.hi; ++ox)
                            d[ox] = s[ox * stride + off_x];
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, int channels, int h, int w, int kh, int kw, int dilation, int stride,
                const ConvGeometry& g, T* in_grad)
{
    const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;
    for (int c = 0; c < channels; ++c) {
        T* dst = in_grad + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            const int off_y = -g.pad_h + dilation * (kh - 1 - ky);
            const auto ys = valid_span(off_y, stride, h, g.out_h);
            for (int kx = 0; kx < kw; ++kx) {
                const int off_x = -g.pad_w + dilation * (kw - 1 - kx);
                const auto xs = valid_span(off_x, stride, w, g.out_w);
                const T* row = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * out_plane;
                for (int oy = ys.lo; oy < ys.hi; ++oy) {
                    T* d = dst + static_cast<std::size_t>(oy * stride + off_y) * w;
                    const T* s = row + static_cast<std::size_t>(oy) * g.out_w;
                    for (int ox = xs.lo; ox < xs.hi; ++ox)
                        d[ox * stride + off_x] += s[ox];
                }
            }
        }
    }
}

template <class T>
bool is_pointwise(const ConvParams<T>& p, const ConvGeometry& g)
{
    return p.kernel_h() == 1 && p.kernel_w() == 1 && p.stride == 1 && g.pad_h == 0 && g.pad_w == 0;
}

template <class T>
void check_input(const Tensor4<T>& input, const ConvParams<T>& p)
{
    if (input.c() != p.in_channels())
        throw ValidationError("conv2d: input has " + std::to_string(input.c()) + " channels, weights expect " +
                              std::to_string(p.in_channels()));
    if (p.bias.empty() || p.bias.c() != p.out_channels())
        throw ValidationError("conv2d: bias size does not match output channels");
}

} // namespace detail

template <class T>
Tensor4<T> conv2d(const Tensor4<T>& input, const ConvParams<T>& p)
{
    detail::check_input(input, p);
    const auto g = conv_geometry(p, input.h(), input.w());
    const int cout = p.out_channels();
    const int k = p.in_channels() * p.kernel_h() * p.kernel_w();
    const int out_plane = g.out_h * g.out_w;
    Tensor4<T> out(input.n(), cout, g.out_h, g.out_w);

    const bool pointwise = detail::is_pointwise(p, g);
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(k) * out_plane);
    for (int n = 0; n < input.n(); ++n) {
        const T* cols = input.plane(n, 0);
        if (!pointwise) {
            detail::im2col(input.plane(n, 0), input.c(), input.h(), input.w(), p.kernel_h(), p.kernel_w(), p.dilation,
                           p.stride, g, col.data());
            cols = col.data();
        }
        T* o = out.plane(n, 0);
        gemm<T>(false, false, cout, out_plane, k, T(1), p.weight.data(), k, cols, out_plane, T(0), o, out_plane);
        for (int co = 0; co < cout; ++co) {
            const T b = p.bias[co];
            T* plane = o + static_cast<std::size_t>(co) * out_plane;
            for (int i = 0; i < out_plane; ++i)
                plane[i] += b;
        }
    }
    return out;
}

/// Accumulates weight and bias gradients into `p` and returns the gradient with
/// respect to `input` (empty when `need_input_grad` is false).
template <class T>
Tensor4<T> conv2d_backward(const Tensor4<T>& input, ConvParams<T>& p, const Tensor4<T>& grad_out,
                           bool need_input_grad = true)
{
    detail::check_input(input, p);
    const auto g = conv_geometry(p, input.h(), input.w());
    const int cout = p.out_channels();
    const int k = p.in_channels() * p.kernel_h() * p.kernel_w();
    const int out_plane = g.out_h * g.out_w;
    if (grad_out.shape() != Shape4{input.n(), cout, g.out_h, g.out_w})
        throw ValidationError("conv2d_backward: gradient shape " + to_string(grad_out.shape()) +
                              " does not match output");
    p.weight.enable_grad();
    p.bias.enable_grad();

    Tensor4<T> grad_in;
    if (need_input_grad)
        grad_in = Tensor4<T>(input.shape());

    const bool pointwise = detail::is_pointwise(p, g);
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(k) * out_plane);
    std::vector<T> dcol(pointwise || !need_input_grad ? 0 : static_cast<std::size_t>(k) * out_plane);
    for (int n = 0; n < input.n(); ++n) {
        const T* dy = grad_out.plane(n, 0);
        const T* cols = input.plane(n, 0);
        if (!pointwise) {
            detail::im2col(input.plane(n, 0), input.c(), input.h(), input.w(), p.kernel_h(), p.kernel_w(), p.dilation,
                           p.stride, g, col.data());
            cols = col.data();
        }
        gemm<T>(false, true, cout, k, out_plane, T(1), dy, out_plane, cols, out_plane, T(1), p.weight.grad().data(), k);
        for (int co = 0; co < cout; ++co) {
            const T* plane = dy + static_cast<std::size_t>(co) * out_plane;
            T s = T(0);
            for (int i = 0; i < out_plane; ++i)
                s += plane[i];
            p.bias.grad()[co] += s;
        }
        if (!need_input_grad)
            continue;
        if (pointwise) {
            gemm<T>(true, false, k, out_plane, cout, T(1), p.weight.data(), k, dy, out_plane, T(0),
                    grad_in.plane(n, 0), out_plane);
        } else {
            gemm<T>(true, false, k, out_plane, cout, T(1), p.weight.data(), k, dy, out_plane, T(0), dcol.data(),
                    out_plane);
            detail::col2im_add(dcol.data(), input.c(), input.h(), input.w(), p.kernel_h(), p.kernel_w(), p.dilation,
                               p.stride, g, grad_in.plane(n, 0));
        }
    }
    return grad_in;
}

} // namespace mfish::nn
