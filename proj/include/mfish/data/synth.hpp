#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "mfish/core/random.hpp"
#include "mfish/data/manifest.hpp"
#include "mfish/data/raster_io.hpp"
#include "mfish/data/sample.hpp"

namespace mfish::data {

/// Parameters of the synthetic mFISH generator.
///
/// Each image is a rows x cols grid of cells; every chromosome class gets one
/// cell (assignment shuffled per image) holding a jittered bar. A class is
/// identified by a combinatorial signature over the five fluorescent channels
/// (singles, then pairs, then triples). DAPI is high on every chromosome.
struct SynthConfig {
    int height = 96;
    int width = 96;
    int rows = 4;
    int cols = 6;
    int num_classes = kNumChromosomeClasses;
    double bar_height_frac = 0.5;  ///< of the cell height
    double bar_width_frac = 0.375; ///< of the cell width
    int jitter = 1;                ///< max bar offset in pixels per axis
    double on_level = 0.8;
    double off_level = 0.1;
    double dapi_level = 0.7;
    double background_level = 0.02;
    double noise_sd = 0.02;
    double exposure_offset = 0.05; ///< per-image, per-channel gain drawn from 1 +/- this
    int overlaps_per_image = 2;
    std::string id_prefix = "SYN";
    std::uint64_t seed = 1;
};

inline void to_json(nlohmann::json& j, const SynthConfig& c)
{
    j = {{"height", c.height},
         {"width", c.width},
         {"rows", c.rows},
         {"cols", c.cols},
         {"num_classes", c.num_classes},
         {"bar_height_frac", c.bar_height_frac},
         {"bar_width_frac", c.bar_width_frac},
         {"jitter", c.jitter},
         {"on_level", c.on_level},
         {"off_level", c.off_level},
         {"dapi_level", c.dapi_level},
         {"background_level", c.background_level},
         {"noise_sd", c.noise_sd},
         {"exposure_offset", c.exposure_offset},
         {"overlaps_per_image", c.overlaps_per_image},
         {"id_prefix", c.id_prefix},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c)
{
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.rows = j.value("rows", c.rows);
    c.cols = j.value("cols", c.cols);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.bar_height_frac = j.value("bar_height_frac", c.bar_height_frac);
    c.bar_width_frac = j.value("bar_width_frac", c.bar_width_frac);
    c.jitter = j.value("jitter", c.jitter);
    c.on_level = j.value("on_level", c.on_level);
    c.off_level = j.value("off_level", c.off_level);
    c.dapi_level = j.value("dapi_level", c.dapi_level);
    c.background_level = j.value("background_level", c.background_level);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.exposure_offset = j.value("exposure_offset", c.exposure_offset);
    c.overlaps_per_image = j.value("overlaps_per_image", c.overlaps_per_image);
    c.id_prefix = j.value("id_prefix", c.id_prefix);
    c.seed = j.value("seed", c.seed);
}

/// Fluorescent-channel signature (first five channels) of class k.
inline std::array<bool, kNumChannels - 1> class_signature(int k)
{
    constexpr int F = kNumChannels - 1;
    std::vector<unsigned> masks;
    for (int pop = 1; pop <= F; ++pop)
        for (unsigned m = 1; m < (1u << F); ++m)
            if (std::popcount(m) == pop)
                masks.push_back(m);
    if (k < 0 || k >= static_cast<int>(masks.size()))
        throw ValidationError("class_signature: class index out of range");
    std::array<bool, F> s{};
    for (int c = 0; c < F; ++c)
        s[c] = (masks[k] >> c) & 1u;
    return s;
}

/// Generates image `index` of the synthetic set; a pure function of (config, index).
inline MfishSample synth_sample(const SynthConfig& cfg, int index, const LabelCoding& coding = {})
{
    if (cfg.num_classes < 1 || cfg.num_classes > coding.num_classes())
        throw ValidationError("synth: class count must lie in [1, 24]");
    if (cfg.rows * cfg.cols < cfg.num_classes)
        throw ValidationError("synth: grid has fewer cells than classes");
    const int H = cfg.height, W = cfg.width;
    const int cell_h = H / cfg.rows, cell_w = W / cfg.cols;
    const int bar_h = std::max(1, static_cast<int>(cell_h * cfg.bar_height_frac));
    const int bar_w = std::max(1, static_cast<int>(cell_w * cfg.bar_width_frac));
    if (bar_h + 2 * cfg.jitter > cell_h || bar_w + 2 * cfg.jitter > cell_w)
        throw ValidationError("synth: bars plus jitter do not fit their cells");

    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d", index);
    MfishSample s;
    s.id = cfg.id_prefix + buf;
    s.labels = LabelMap(H, W, coding.background_code());

    Rng rng(mix_seed({cfg.seed, 0x73796e7468ULL, static_cast<std::uint64_t>(index)}));
    std::array<double, kNumChannels> gain{};
    for (auto& g : gain)
        g = 1.0 + rng.uniform(-cfg.exposure_offset, cfg.exposure_offset);

    std::vector<int> cells(cfg.rows * cfg.cols);
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(cells.begin(), cells.end());

    // Clean intensities before exposure and noise.
    std::array<std::vector<double>, kNumChannels> clean;
    for (auto& c : clean)
        c.assign(static_cast<std::size_t>(H) * W, cfg.background_level);
    auto paint = [&](int y, int x, int k) {
        const auto sig = class_signature(k);
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        for (int c = 0; c + 1 < kNumChannels; ++c)
            clean[c][i] = sig[c] ? cfg.on_level : cfg.off_level;
        clean[kNumChannels - 1][i] = cfg.dapi_level;
    };

    struct Bar {
        int y0, x0, k;
    };
    std::vector<Bar> bars;
    for (int k = 0; k < cfg.num_classes; ++k) {
        const int cell = cells[k];
        const int cy = (cell / cfg.cols) * cell_h, cx = (cell % cfg.cols) * cell_w;
        const int oy = static_cast<int>(rng.index(2 * cfg.jitter + 1)) - cfg.jitter;
        const int ox = static_cast<int>(rng.index(2 * cfg.jitter + 1)) - cfg.jitter;
        const Bar b{cy + (cell_h - bar_h) / 2 + oy, cx + (cell_w - bar_w) / 2 + ox, k};
        bars.push_back(b);
        for (int y = b.y0; y < b.y0 + bar_h; ++y)
            for (int x = b.x0; x < b.x0 + bar_w; ++x) {
                s.labels.at(y, x) = coding.code_of(k);
                paint(y, x, k);
            }
    }

    // Overlaps: the top rows of a few bars carry the sum of two signatures.
    const int overlap_rows = std::max(1, bar_h / 6);
    for (int o = 0; o < std::min(cfg.overlaps_per_image, cfg.num_classes); ++o) {
        const Bar& b = bars[rng.index(bars.size())];
        const int other = static_cast<int>(rng.index(cfg.num_classes));
        const auto sig = class_signature(other);
        for (int y = b.y0; y < b.y0 + overlap_rows; ++y)
            for (int x = b.x0; x < b.x0 + bar_w; ++x) {
                s.labels.at(y, x) = coding.overlap_code();
                const std::size_t i = static_cast<std::size_t>(y) * W + x;
                for (int c = 0; c + 1 < kNumChannels; ++c)
                    clean[c][i] = std::min(1.0, clean[c][i] + (sig[c] ? cfg.on_level : cfg.off_level));
                clean[kNumChannels - 1][i] = std::min(1.0, 2 * cfg.dapi_level);
            }
    }

    for (int c = 0; c < kNumChannels; ++c) {
        s.channels[c] = Channel(H, W);
        for (std::size_t i = 0; i < clean[c].size(); ++i) {
            const double v = clean[c][i] * gain[c] + cfg.noise_sd * rng.normal();
            s.channels[c].pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return s;
}

inline std::vector<MfishSample> synth_dataset(const SynthConfig& cfg, int count, const LabelCoding& coding = {})
{
    std::vector<MfishSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(synth_sample(cfg, i, coding));
    return out;
}

/// Writes samples as 16-bit channel PNGs plus an 8/16-bit label PNG and a
/// manifest (with an empty exclusion list) into `dir`. Returns the manifest path.
inline std::filesystem::path write_dataset(const std::vector<MfishSample>& samples, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    DatasetManifest m;
    m.exclusion_list.clear();
    for (const auto& s : samples) {
        ManifestEntry e;
        e.id = s.id;
        e.probe_set = s.probe_set;
        for (int c = 0; c < kNumChannels; ++c) {
            const std::string name = s.id + "_" + std::string(kChannelNames[c]) + ".png";
            write_intensity(dir / name, s.channels[c], 16);
            e.channels[c] = name;
        }
        e.labels = s.id + "_labels.png";
        write_labels(dir / e.labels, s.labels);
        m.samples.push_back(std::move(e));
    }
    const auto path = dir / "manifest.json";
    m.save(path);
    return path;
}

} // namespace mfish::data
