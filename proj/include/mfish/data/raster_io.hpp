#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "mfish/core/error.hpp"
#include "mfish/data/image.hpp"

namespace mfish::data {

namespace detail {

inline cv::Mat read_single_channel(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path))
        throw IoError("missing file: " + path.string());
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty())
        throw IoError("cannot decode raster: " + path.string());
    if (m.channels() != 1)
        throw IoError("expected a single-channel raster: " + path.string());
    if (m.depth() != CV_8U && m.depth() != CV_16U)
        throw IoError("expected 8- or 16-bit samples: " + path.string());
    return m;
}

} // namespace detail

/// Reads an 8/16-bit grayscale PNG or TIFF, dividing by the format maximum.
inline Channel read_intensity(const std::filesystem::path& path)
{
    const cv::Mat m = detail::read_single_channel(path);
    Channel out(m.rows, m.cols);
    const float scale = m.depth() == CV_8U ? 1.0f / 255.0f : 1.0f / 65535.0f;
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            out.at(y, x) = (m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x)) * scale;
    return out;
}

inline LabelMap read_labels(const std::filesystem::path& path)
{
    const cv::Mat m = detail::read_single_channel(path);
    LabelMap out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            out.at(y, x) = m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
    return out;
}

inline void write_mat(const std::filesystem::path& path, const cv::Mat& m)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m))
        throw IoError("cannot write image: " + path.string());
}

/// Quantises [0, 1] intensities to 8 or 16 bits.
inline void write_intensity(const std::filesystem::path& path, const Channel& channel, int bits = 16)
{
    if (bits != 8 && bits != 16)
        throw ValidationError("write_intensity: bits must be 8 or 16");
    const double max = bits == 8 ? 255.0 : 65535.0;
    cv::Mat m(channel.height, channel.width, bits == 8 ? CV_8U : CV_16U);
    for (int y = 0; y < channel.height; ++y)
        for (int x = 0; x < channel.width; ++x) {
            const double v = std::clamp(static_cast<double>(channel.at(y, x)), 0.0, 1.0) * max + 0.5;
            if (bits == 8)
                m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(v);
            else
                m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
        }
    write_mat(path, m);
}

/// Writes label codes as 8-bit when they fit, 16-bit otherwise.
inline void write_labels(const std::filesystem::path& path, const LabelMap& labels)
{
    int max_code = 0;
    for (auto v : labels.pixels) {
        if (v < 0 || v > 65535)
            throw ValidationError("write_labels: code " + std::to_string(v) + " does not fit in 16 bits");
        max_code = std::max(max_code, static_cast<int>(v));
    }
    const bool narrow = max_code <= 255;
    cv::Mat m(labels.height, labels.width, narrow ? CV_8U : CV_16U);
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x) {
            if (narrow)
                m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(labels.at(y, x));
            else
                m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(labels.at(y, x));
        }
    write_mat(path, m);
}

} // namespace mfish::data
