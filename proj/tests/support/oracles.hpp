#pragma once

// Brute-force reference evaluations used by the unit and acceptance suites.
// None of these share code with the library kernels they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mfish/nn/tensor.hpp"

namespace mfish::oracle {

/// Direct dilated convolution: for each output position p, sums f(s) * k(t)
/// over every input position s and centred kernel tap t with s + l*t = p*stride.
/// Zero padding is implicit (positions outside the input do not exist).
inline nn::Tensor4<double> dilated_conv(const nn::Tensor4<double>& f, const nn::Tensor4<double>& k,
                                        const std::vector<double>& bias, int l, int stride = 1)
{
    const int ry = k.h() / 2, rx = k.w() / 2;
    const int oh = (f.h() - 1) / stride + 1, ow = (f.w() - 1) / stride + 1;
    nn::Tensor4<double> out(f.n(), k.n(), oh, ow);
    for (int n = 0; n < f.n(); ++n)
        for (int co = 0; co < k.n(); ++co)
            for (int py = 0; py < oh; ++py)
                for (int px = 0; px < ow; ++px) {
                    double acc = bias[co];
                    for (int ci = 0; ci < f.c(); ++ci)
                        for (int sy = 0; sy < f.h(); ++sy)
                            for (int sx = 0; sx < f.w(); ++sx)
                                for (int ty = -ry; ty <= ry; ++ty)
                                    for (int tx = -rx; tx <= rx; ++tx)
                                        if (sy + l * ty == py * stride && sx + l * tx == px * stride)
                                            acc += f(n, ci, sy, sx) * k(co, ci, ty + ry, tx + rx);
                    out(n, co, py, px) = acc;
                }
    return out;
}

/// Textbook discrete convolution (f * k)(x) = sum_m f(m) k(x - m) with a centred kernel.
inline nn::Tensor4<double> standard_conv(const nn::Tensor4<double>& f, const nn::Tensor4<double>& k,
                                         const std::vector<double>& bias)
{
    const int ry = k.h() / 2, rx = k.w() / 2;
    nn::Tensor4<double> out(f.n(), k.n(), f.h(), f.w());
    for (int n = 0; n < f.n(); ++n)
        for (int co = 0; co < k.n(); ++co)
            for (int y = 0; y < f.h(); ++y)
                for (int x = 0; x < f.w(); ++x) {
                    double acc = bias[co];
                    for (int ci = 0; ci < f.c(); ++ci)
                        for (int my = 0; my < f.h(); ++my)
                            for (int mx = 0; mx < f.w(); ++mx) {
                                const int dy = y - my + ry, dx = x - mx + rx;
                                if (dy >= 0 && dy < k.h() && dx >= 0 && dx < k.w())
                                    acc += f(n, ci, my, mx) * k(co, ci, dy, dx);
                            }
                    out(n, co, y, x) = acc;
                }
    return out;
}

inline nn::Tensor4<double> window_max(const nn::Tensor4<double>& in, int pool, int stride)
{
    const int oh = (in.h() - pool) / stride + 1, ow = (in.w() - pool) / stride + 1;
    nn::Tensor4<double> out(in.n(), in.c(), oh, ow);
    for (int n = 0; n < in.n(); ++n)
        for (int c = 0; c < in.c(); ++c)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double m = -std::numeric_limits<double>::infinity();
                    for (int dy = 0; dy < pool; ++dy)
                        for (int dx = 0; dx < pool; ++dx)
                            m = std::max(m, in(n, c, y * stride + dy, x * stride + dx));
                    out(n, c, y, x) = m;
                }
    return out;
}

inline double max_abs_diff(const nn::Tensor4<double>& a, const nn::Tensor4<double>& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace mfish::oracle
