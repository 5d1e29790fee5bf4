#pragma once

#include <array>
#include <string>
#include <string_view>

#include "mfish/data/image.hpp"
#include "mfish/data/label_coding.hpp"

namespace mfish::data {

inline constexpr int kNumChannels = 6;

/// Fixed channel order of every sample.
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames{"aqua", "far_red", "green",
                                                                          "red",  "gold",    "dapi"};

enum class ProbeSet { vysis, asi, psi };

inline std::string_view to_string(ProbeSet p)
{
    switch (p) {
    case ProbeSet::vysis:
        return "vysis";
    case ProbeSet::asi:
        return "asi";
    case ProbeSet::psi:
        return "psi";
    }
    return "vysis";
}

inline ProbeSet probe_set_from_string(std::string_view s)
{
    if (s == "vysis" || s == "Vysis")
        return ProbeSet::vysis;
    if (s == "asi" || s == "ASI")
        return ProbeSet::asi;
    if (s == "psi" || s == "PSI")
        return ProbeSet::psi;
    throw ValidationError("unknown probe set '" + std::string(s) + "'");
}

/// One cell: six registered channel images plus the per-pixel ground truth.
struct MfishSample {
    std::string id;
    std::array<Channel, kNumChannels> channels;
    LabelMap labels;
    ProbeSet probe_set = ProbeSet::vysis;

    int height() const { return labels.height; }
    int width() const { return labels.width; }

    /// Checks shared dimensions, the [0, 1] intensity range and the label codes.
    void validate(const LabelCoding& coding) const
    {
        for (int c = 0; c < kNumChannels; ++c) {
            if (!channels[c].same_size(labels))
                throw ValidationError(id + ": channel '" + std::string(kChannelNames[c]) +
                                      "' does not match the label map size");
            for (float v : channels[c].pixels)
                if (!(v >= 0.0f && v <= 1.0f))
                    throw ValidationError(id + ": intensity outside [0, 1] in channel '" +
                                          std::string(kChannelNames[c]) + "'");
        }
        coding.check_labels(labels, id);
    }

    std::size_t chromosome_pixel_count(const LabelCoding& coding) const
    {
        std::size_t n = 0;
        for (auto v : labels.pixels)
            n += coding.is_chromosome(v) ? 1 : 0;
        return n;
    }
};

} // namespace mfish::data
