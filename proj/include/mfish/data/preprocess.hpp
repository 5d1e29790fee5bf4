#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "mfish/data/sample.hpp"

namespace mfish::data {

/// Axis-aligned window in pixel coordinates; `x`/`y` is the top-left corner.
struct CropWindow {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool fits(int image_width, int image_height) const
    {
        return x >= 0 && y >= 0 && width > 0 && height > 0 && x + width <= image_width && y + height <= image_height;
    }

    friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

inline std::string to_string(const CropWindow& c)
{
    return std::to_string(c.width) + "x" + std::to_string(c.height) + "+" + std::to_string(c.x) + "+" +
           std::to_string(c.y);
}

/// floor(extent * scale), robust to products such as 490 * 0.7 landing just below an integer.
inline int scaled_extent(int extent, double scale)
{
    return static_cast<int>(std::floor(extent * scale + 1e-9));
}

namespace detail {

struct Bounds {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive; empty when x1 < x0

    bool empty() const { return x1 < x0; }
    void add(int x, int y)
    {
        if (empty()) {
            x0 = x1 = x;
            y0 = y1 = y;
            return;
        }
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
};

inline void add_foreground(Bounds& b, const LabelMap& labels, const LabelCoding& coding)
{
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x)
            if (labels.at(y, x) != coding.background_code())
                b.add(x, y);
}

// Centres a window of `want` pixels on [lo, hi] and slides it back inside [0, limit).
inline std::pair<int, int> place_axis(int lo, int hi, int want, int limit)
{
    const int size = std::min(want, limit);
    int start = (lo + hi + 1) / 2 - size / 2;
    start = std::clamp(start, 0, limit - size);
    return {start, size};
}

inline CropWindow window_around(const Bounds& b, int width, int height, int image_width, int image_height)
{
    if (b.empty()) {
        const auto [x, w] = place_axis(0, image_width - 1, width, image_width);
        const auto [y, h] = place_axis(0, image_height - 1, height, image_height);
        return {x, y, w, h};
    }
    const auto [x, w] = place_axis(b.x0, b.x1, width, image_width);
    const auto [y, h] = place_axis(b.y0, b.y1, height, image_height);
    return {x, y, w, h};
}

} // namespace detail

/// A `width` x `height` window centred on the non-background pixels of one
/// label map and clamped to the image.
inline CropWindow label_crop_window(const LabelMap& labels, const LabelCoding& coding, int width, int height)
{
    detail::Bounds b;
    detail::add_foreground(b, labels, coding);
    return detail::window_around(b, width, height, labels.width, labels.height);
}

/// Same as label_crop_window but over the union of all samples' foreground,
/// so a single window keeps every chromosome pixel of the dataset in frame
/// whenever that is geometrically possible. All samples must share a size.
inline CropWindow dataset_crop_window(std::span<const MfishSample> samples, const LabelCoding& coding, int width,
                                      int height)
{
    if (samples.empty())
        throw ValidationError("dataset_crop_window: no samples");
    detail::Bounds b;
    for (const auto& s : samples) {
        if (s.height() != samples[0].height() || s.width() != samples[0].width())
            throw ValidationError("dataset_crop_window: sample " + s.id + " differs in size from " + samples[0].id);
        detail::add_foreground(b, s.labels, coding);
    }
    return detail::window_around(b, width, height, samples[0].width(), samples[0].height());
}

/// Bilinear resampling of the `crop` region to out_w x out_h using pixel-centre
/// alignment (source = (dst + 0.5) * in / out - 0.5, clamped to the region).
inline Channel resample_bilinear(const Channel& src, const CropWindow& crop, int out_w, int out_h)
{
    Channel out(out_h, out_w);
    const double sx = static_cast<double>(crop.width) / out_w;
    const double sy = static_cast<double>(crop.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, crop.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, crop.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, crop.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, crop.width - 1);
            const double wx = fx - x0;
            const double top = (1 - wx) * src.at(crop.y + y0, crop.x + x0) + wx * src.at(crop.y + y0, crop.x + x1);
            const double bot = (1 - wx) * src.at(crop.y + y1, crop.x + x0) + wx * src.at(crop.y + y1, crop.x + x1);
            out.at(y, x) = static_cast<float>(std::clamp((1 - wy) * top + wy * bot, 0.0, 1.0));
        }
    }
    return out;
}

/// Nearest-neighbour resampling with the same pixel-centre alignment.
inline LabelMap resample_nearest(const LabelMap& src, const CropWindow& crop, int out_w, int out_h)
{
    LabelMap out(out_h, out_w);
    const double sx = static_cast<double>(crop.width) / out_w;
    const double sy = static_cast<double>(crop.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const int iy = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), crop.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const int ix = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), crop.width - 1);
            out.at(y, x) = src.at(crop.y + iy, crop.x + ix);
        }
    }
    return out;
}

/// Crops every channel and the label map to `crop`, then downsizes by `scale`
/// (bilinear for intensities, nearest for labels). Output size is
/// floor(crop extent * scale) on each axis.
inline MfishSample preprocess(const MfishSample& sample, const CropWindow& crop, double scale)
{
    if (!(scale > 0.0 && scale <= 1.0))
        throw ValidationError("preprocess: scale must lie in (0, 1], got " + std::to_string(scale));
    if (!crop.fits(sample.width(), sample.height()))
        throw ValidationError("preprocess: crop " + to_string(crop) + " exceeds " + sample.id + " (" +
                              std::to_string(sample.width()) + "x" + std::to_string(sample.height()) + ")");
    const int out_w = scaled_extent(crop.width, scale);
    const int out_h = scaled_extent(crop.height, scale);
    if (out_w <= 0 || out_h <= 0)
        throw ValidationError("preprocess: scaled output is empty");

    MfishSample out;
    out.id = sample.id;
    out.probe_set = sample.probe_set;
    for (int c = 0; c < kNumChannels; ++c)
        out.channels[c] = resample_bilinear(sample.channels[c], crop, out_w, out_h);
    out.labels = resample_nearest(sample.labels, crop, out_w, out_h);
    return out;
}

} // namespace mfish::data
