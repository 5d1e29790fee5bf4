#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "mfish/core/random.hpp"
#include "mfish/data/sample.hpp"

namespace mfish::data {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool finite() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
    double draw(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

/// Ranges for the random similarity transform applied during training.
/// Translation is a fraction of the image width/height.
struct AugmentationConfig {
    Interval rotation_deg{-180.0, 180.0};
    Interval scale{0.9, 1.1};
    Interval translation_frac{-0.1, 0.1};
    std::uint64_t seed = 0;
    bool enabled = true;

    /// A config whose every draw is the identity transform.
    static AugmentationConfig identity()
    {
        return {{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}, 0, true};
    }

    void validate() const
    {
        if (!rotation_deg.finite() || !scale.finite() || !translation_frac.finite())
            throw ValidationError("AugmentationConfig: ranges must be finite with lo <= hi");
        if (!(scale.lo > 0.0))
            throw ValidationError("AugmentationConfig: scale range must be strictly positive");
    }
};

struct AffineParams {
    double rotation_deg = 0.0;
    double scale = 1.0;
    double tx_frac = 0.0;
    double ty_frac = 0.0;
};

/// Draws the transform for one (sample, epoch) pair. The stream depends only
/// on the config seed, the sample id and the epoch.
inline AffineParams draw_affine(const AugmentationConfig& config, const std::string& sample_id, std::uint64_t epoch)
{
    config.validate();
    Rng rng(mix_seed({config.seed, hash_string(sample_id), epoch}));
    AffineParams p;
    p.rotation_deg = config.rotation_deg.draw(rng);
    p.scale = config.scale.draw(rng);
    p.tx_frac = config.translation_frac.draw(rng);
    p.ty_frac = config.translation_frac.draw(rng);
    return p;
}

namespace detail {

inline double snap(double v)
{
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

// Inverse map of the forward transform
//   out = c + t + s * R(theta) * (in - c)
// with c = ((W-1)/2, (H-1)/2) and y pointing down.
struct InverseAffine {
    double cx, cy, tx, ty, a, b; // in = c + [a b; -b a] (out - c - t)

    InverseAffine(const AffineParams& p, int width, int height)
    {
        cx = (width - 1) / 2.0;
        cy = (height - 1) / 2.0;
        tx = p.tx_frac * width;
        ty = p.ty_frac * height;
        const double th = p.rotation_deg * std::numbers::pi / 180.0;
        double c = std::cos(th), s = std::sin(th);
        c = snap(c);
        s = snap(s);
        a = c / p.scale;
        b = s / p.scale;
    }

    void map(int x, int y, double& sx, double& sy) const
    {
        const double dx = x - cx - tx, dy = y - cy - ty;
        sx = snap(cx + a * dx + b * dy);
        sy = snap(cy - b * dx + a * dy);
    }
};

} // namespace detail

/// Applies one transform to all channels (bilinear) and the label map
/// (nearest). Pixels mapped from outside the frame become zero intensity and
/// background label.
inline MfishSample apply_affine(const MfishSample& sample, const AffineParams& params, const LabelCoding& coding)
{
    const int H = sample.height(), W = sample.width();
    const detail::InverseAffine inv(params, W, H);
    MfishSample out;
    out.id = sample.id;
    out.probe_set = sample.probe_set;
    out.labels = LabelMap(H, W, coding.background_code());
    for (auto& ch : out.channels)
        ch = Channel(H, W, 0.0f);

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double sx, sy;
            inv.map(x, y, sx, sy);
            const long nx = std::lround(sx), ny = std::lround(sy);
            if (nx >= 0 && nx < W && ny >= 0 && ny < H)
                out.labels.at(y, x) = sample.labels.at(static_cast<int>(ny), static_cast<int>(nx));
            if (sx < 0.0 || sx > W - 1.0 || sy < 0.0 || sy > H - 1.0)
                continue;
            const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            const double wx = sx - x0, wy = sy - y0;
            for (int c = 0; c < kNumChannels; ++c) {
                const auto& s = sample.channels[c];
                const double top = (1 - wx) * s.at(y0, x0) + wx * s.at(y0, x1);
                const double bot = (1 - wx) * s.at(y1, x0) + wx * s.at(y1, x1);
                out.channels[c].at(y, x) = static_cast<float>((1 - wy) * top + wy * bot);
            }
        }
    return out;
}

/// Draws and applies the transform for `epoch`. A disabled config returns the sample unchanged.
inline MfishSample augment(const MfishSample& sample, const AugmentationConfig& config, const LabelCoding& coding,
                           std::uint64_t epoch)
{
    if (!config.enabled)
        return sample;
    return apply_affine(sample, draw_affine(config, sample.id, epoch), coding);
}

} // namespace mfish::data
