#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>

#include "mfish/core/error.hpp"

namespace mfish::report {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Fixed colours for the 24 chromosome classes, indexed like
/// LabelCoding::chromosome_codes (1..22, X, Y).
inline constexpr std::array<Rgb, 24> kClassPalette{{
    {0xe6, 0x19, 0x4b}, // 1
    {0x3c, 0xb4, 0x4b}, // 2
    {0xff, 0xe1, 0x19}, // 3
    {0x43, 0x63, 0xd8}, // 4
    {0xf5, 0x82, 0x31}, // 5
    {0x91, 0x1e, 0xb4}, // 6
    {0x42, 0xd4, 0xf4}, // 7
    {0xf0, 0x32, 0xe6}, // 8
    {0xbf, 0xef, 0x45}, // 9
    {0xfa, 0xbe, 0xd4}, // 10
    {0x46, 0x99, 0x90}, // 11
    {0xdc, 0xbe, 0xff}, // 12
    {0x9a, 0x63, 0x24}, // 13
    {0xff, 0xfa, 0xc8}, // 14
    {0x80, 0x00, 0x00}, // 15
    {0xaa, 0xff, 0xc3}, // 16
    {0x80, 0x80, 0x00}, // 17
    {0xff, 0xd8, 0xb1}, // 18
    {0x00, 0x00, 0x75}, // 19
    {0xa9, 0xa9, 0xa9}, // 20
    {0x7f, 0x00, 0xff}, // 21
    {0x00, 0xff, 0x7f}, // 22
    {0x2f, 0x4f, 0x4f}, // X
    {0x00, 0x00, 0x00}, // Y
}};

/// Stripe colour drawn over overlap pixels.
inline constexpr Rgb kOverlapHatch{0x40, 0x40, 0x40};

inline Rgb class_color(int class_index)
{
    if (class_index < 0 || class_index >= static_cast<int>(kClassPalette.size()))
        throw ValidationError("class_color: index " + std::to_string(class_index) + " out of range");
    return kClassPalette[class_index];
}

inline std::string to_hex(const Rgb& c)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

} // namespace mfish::report
