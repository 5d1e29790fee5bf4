#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "mfish/data/image.hpp"
#include "mfish/data/label_coding.hpp"
#include "mfish/metrics/ccr.hpp"
#include "mfish/metrics/error_matrix.hpp"
#include "mfish/report/palette.hpp"

namespace mfish::report {

/// BGRA rendering of a label map: chromosome classes in the fixed palette,
/// background fully transparent, overlap as diagonal stripes over a
/// transparent ground. Codes outside the coding render transparent too.
inline cv::Mat colorize(const data::LabelMap& labels, const data::LabelCoding& coding)
{
    cv::Mat out(labels.height, labels.width, CV_8UC4, cv::Scalar(0, 0, 0, 0));
    for (int y = 0; y < labels.height; ++y)
        for (int x = 0; x < labels.width; ++x) {
            const int code = labels.at(y, x);
            auto& px = out.at<cv::Vec4b>(y, x);
            if (const int k = coding.class_index(code); k >= 0) {
                const Rgb c = class_color(k);
                px = {c.b, c.g, c.r, 255};
            } else if (code == coding.overlap_code() && (x + y) % 4 < 2) {
                px = {kOverlapHatch.b, kOverlapHatch.g, kOverlapHatch.r, 255};
            }
        }
    return out;
}

/// Ground truth (left) and prediction (right) separated by a transparent gap.
inline cv::Mat overlay_pair(const data::LabelMap& truth, const data::LabelMap& pred, const data::LabelCoding& coding,
                            int gap = 8)
{
    if (!truth.same_size(pred))
        throw ValidationError("overlay_pair: truth and prediction differ in size");
    cv::Mat out(truth.height, 2 * truth.width + gap, CV_8UC4, cv::Scalar(0, 0, 0, 0));
    colorize(truth, coding).copyTo(out(cv::Rect(0, 0, truth.width, truth.height)));
    colorize(pred, coding).copyTo(out(cv::Rect(truth.width + gap, 0, pred.width, pred.height)));
    return out;
}

/// Heatmap geometry, exposed so callers and tests can locate cells.
struct HeatmapLayout {
    int cell = 24;
    int margin_left = 0;
    int margin_top = 0;
    int rows = 0;
    int cols = 0;

    int width() const { return margin_left + cols * cell + 8; }
    int height() const { return margin_top + rows * cell + 8; }
    cv::Rect cell_rect(int r, int c) const { return {margin_left + c * cell, margin_top + r * cell, cell, cell}; }
};

inline HeatmapLayout heatmap_layout(int rows, int cols, const std::vector<std::string>& row_labels,
                                    const std::vector<std::string>& col_labels, int cell = 24)
{
    auto longest = [](const std::vector<std::string>& v) {
        int w = 0, base = 0;
        for (const auto& s : v)
            w = std::max(w, cv::getTextSize(s, cv::FONT_HERSHEY_SIMPLEX, 0.4, 1, &base).width);
        return w;
    };
    return {cell, longest(row_labels) + 10, longest(col_labels) + 10, rows, cols};
}

/// Renders a rows x cols table of values in [lo, hi] with the viridis colour
/// map. Row labels run down the left edge, column labels are written
/// vertically along the top.
inline cv::Mat render_heatmap(const std::vector<double>& values, int rows, int cols,
                              const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels,
                              double lo = 0.0, double hi = 1.0, int cell = 24)
{
    if (static_cast<int>(values.size()) != rows * cols || static_cast<int>(row_labels.size()) != rows ||
        static_cast<int>(col_labels.size()) != cols)
        throw ValidationError("render_heatmap: values and labels do not match the table shape");
    const auto layout = heatmap_layout(rows, cols, row_labels, col_labels, cell);
    cv::Mat scalar(rows, cols, CV_8U);
    const double span = hi > lo ? hi - lo : 1.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = std::clamp((values[r * cols + c] - lo) / span, 0.0, 1.0);
            scalar.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    cv::Mat colored;
    cv::applyColorMap(scalar, colored, cv::COLORMAP_VIRIDIS);

    cv::Mat out(layout.height(), layout.width(), CV_8UC3, cv::Scalar(255, 255, 255));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out(layout.cell_rect(r, c)).setTo(colored.at<cv::Vec3b>(r, c));
    for (int r = 0; r < rows; ++r)
        cv::putText(out, row_labels[r], {4, layout.margin_top + r * cell + cell / 2 + 4}, cv::FONT_HERSHEY_SIMPLEX,
                    0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    // Column labels: draw horizontally on a scratch image, then rotate.
    for (int c = 0; c < cols; ++c) {
        cv::Mat text(cell, layout.margin_top, CV_8UC3, cv::Scalar(255, 255, 255));
        cv::putText(text, col_labels[c], {4, cell / 2 + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1,
                    cv::LINE_AA);
        cv::Mat rotated;
        cv::rotate(text, rotated, cv::ROTATE_90_COUNTERCLOCKWISE);
        rotated.copyTo(out(cv::Rect(layout.margin_left + c * cell, 0, cell, layout.margin_top)));
    }
    return out;
}

inline cv::Mat render_error_matrix(const metrics::ErrorMatrix& m, int cell = 24)
{
    const int n = static_cast<int>(m.size());
    return render_heatmap(m.values, n, n, m.ids, m.ids, 0.0, 1.0, cell);
}

/// Row-normalised confusion matrix (truth rows, predicted columns, plus the
/// "not a chromosome" column).
inline cv::Mat render_confusion(const metrics::ConfusionMatrix& m, const data::LabelCoding& coding, int cell = 18)
{
    const int k = m.num_classes();
    std::vector<double> values;
    std::vector<std::string> rows, cols;
    for (int t = 0; t < k; ++t) {
        rows.push_back(coding.name(coding.code_of(t)));
        const double total = static_cast<double>(m.row_sum(t));
        for (int p = 0; p <= k; ++p)
            values.push_back(total > 0 ? static_cast<double>(m.at(t, p)) / total : 0.0);
    }
    cols = rows;
    cols.push_back("other");
    return render_heatmap(values, k, k + 1, rows, cols, 0.0, 1.0, cell);
}

} // namespace mfish::report
