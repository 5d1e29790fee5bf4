#pragma once

#include <cstdint>
#include <vector>

#include "mfish/core/error.hpp"

namespace mfish::data {

/// Single-channel raster stored row-major.
template <class T>
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<T> pixels;

    Plane() = default;
    Plane(int h, int w, T fill = T{}) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill)
    {
        if (h <= 0 || w <= 0)
            throw ValidationError("Plane: dimensions must be positive");
    }

    T& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return pixels.size(); }
    bool same_size(const auto& other) const { return height == other.height && width == other.width; }

    friend bool operator==(const Plane&, const Plane&) = default;
};

using Channel = Plane<float>;
using LabelMap = Plane<std::int32_t>;

} // namespace mfish::data
