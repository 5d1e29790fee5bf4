#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfish/core/error.hpp"

namespace mfish::nn {

enum class Mode { train, infer };

/// Dimensions of a rank-4 (batch, channel, height, width) array.
struct Shape4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const
    {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    bool positive() const { return n > 0 && c > 0 && h > 0 && w > 0; }

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s)
{
    return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

/// Dense NCHW array with optional gradient storage of the same shape.
template <class T>
class Tensor4 {
public:
    using value_type = T;

    Tensor4() = default;

    explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(shape)
    {
        if (!shape.positive())
            throw ValidationError("Tensor4: dimensions must be positive, got " + to_string(shape));
        values_.assign(shape.size(), fill);
    }

    Tensor4(int n, int c, int h, int w, T fill = T(0)) : Tensor4(Shape4{n, c, h, w}, fill) {}

    const Shape4& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t offset(int n, int c, int y, int x) const
    {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    T& operator()(int n, int c, int y, int x) { return values_[offset(n, c, y, x)]; }
    const T& operator()(int n, int c, int y, int x) const { return values_[offset(n, c, y, x)]; }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    /// Pointer to the H*W plane of (n, c).
    T* plane(int n, int c) { return values_.data() + offset(n, c, 0, 0); }
    const T* plane(int n, int c) const { return values_.data() + offset(n, c, 0, 0); }

    bool has_grad() const { return !grad_.empty(); }
    void enable_grad()
    {
        if (grad_.size() != values_.size())
            grad_.assign(values_.size(), T(0));
    }
    void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }
    std::span<T> grad() { return grad_; }
    std::span<const T> grad() const { return grad_; }

    void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

private:
    Shape4 shape_{};
    std::vector<T> values_;
    std::vector<T> grad_;
};

template <class T>
void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* what)
{
    if (a.shape() != b.shape())
        throw ValidationError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                              to_string(b.shape()));
}

} // namespace mfish::nn
