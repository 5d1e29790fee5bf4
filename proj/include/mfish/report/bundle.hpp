#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "mfish/core/json_io.hpp"
#include "mfish/data/raster_io.hpp"
#include "mfish/metrics/error_matrix.hpp"
#include "mfish/report/render.hpp"
#include "mfish/train/loocv.hpp"

namespace mfish::report {

struct ReportBundle {
    std::filesystem::path document;              ///< report.md
    std::vector<std::filesystem::path> overlays; ///< one per fold, in fold order
    std::filesystem::path confusion_png;
    std::filesystem::path error_matrix_png; ///< empty unless the run holds an error matrix
    std::vector<train::FoldResult> folds;
    double mean_ccr = 0.0;
};

namespace detail {

inline std::string percent(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

inline std::vector<std::filesystem::path> fold_dirs(const std::filesystem::path& run_dir)
{
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(run_dir))
        if (e.is_directory() && e.path().filename().string().rfind("fold_", 0) == 0 &&
            std::filesystem::exists(e.path() / "fold_result.json"))
            dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

inline std::string palette_table(const data::LabelCoding& coding)
{
    std::string md = "| class | colour |\n|---|---|\n";
    for (int k = 0; k < coding.num_classes(); ++k)
        md += "| " + coding.name(coding.code_of(k)) + " | `" + to_hex(class_color(k)) + "` |\n";
    return md;
}

} // namespace detail

/// Renders the report for a finished run directory into `run_dir/report`.
///
/// A LOOCV run contributes one overlay per fold (ground truth left,
/// final-epoch prediction right), a pooled confusion heatmap over those
/// predictions and the CCR tables. A run holding `error_matrix.csv`
/// contributes its heatmap and statistics. Throws IoError when the directory
/// holds neither, or when a fold is missing its label images.
inline ReportBundle build_report(const std::filesystem::path& run_dir, const data::LabelCoding& coding = {})
{
    if (!std::filesystem::is_directory(run_dir))
        throw IoError("report: run directory " + run_dir.string() + " does not exist");
    const auto out_dir = run_dir / "report";
    std::filesystem::create_directories(out_dir);
    ReportBundle bundle;
    std::string md = "# Run report\n\nRun directory: `" + run_dir.string() + "`\n\n";

    const auto dirs = detail::fold_dirs(run_dir);
    const bool has_matrix = std::filesystem::exists(run_dir / "error_matrix.csv");
    if (dirs.empty() && !has_matrix)
        throw IoError("report: " + run_dir.string() + " holds neither fold results nor an error matrix");

    if (!dirs.empty()) {
        metrics::ConfusionMatrix pooled(coding.num_classes());
        for (const auto& dir : dirs) {
            auto fold = read_json(dir / "fold_result.json").get<train::FoldResult>();
            for (const char* name : {"prediction.png", "truth.png"})
                if (!std::filesystem::exists(dir / name))
                    throw IoError("report: missing " + (dir / name).string());
            const auto pred = data::read_labels(dir / "prediction.png");
            const auto truth = data::read_labels(dir / "truth.png");
            pooled.merge(metrics::confusion(pred, truth, coding));
            const auto overlay = out_dir / ("overlay_" + dir.filename().string() + ".png");
            data::write_mat(overlay, overlay_pair(truth, pred, coding));
            bundle.overlays.push_back(overlay);
            bundle.folds.push_back(std::move(fold));
        }
        const auto summary = train::summarize(bundle.folds);
        bundle.folds = summary.folds;
        bundle.mean_ccr = summary.mean_ccr;
        bundle.confusion_png = out_dir / "confusion.png";
        data::write_mat(bundle.confusion_png, render_confusion(pooled, coding));
        write_json(out_dir / "confusion.json", pooled.to_json());

        md += "## Leave-one-out CCR\n\n";
        md += "Mean CCR over folds: **" + detail::percent(summary.mean_ccr) + "** (pooled over pixels: " +
              detail::percent(summary.pooled_ccr) + ")\n\n";
        md += "| fold | test image | final CCR | evaluated epochs |\n|---|---|---|---|\n";
        for (const auto& f : bundle.folds) {
            std::string epochs;
            for (const auto& e : f.per_epoch_ccr)
                epochs += (epochs.empty() ? "" : ", ") + std::to_string(e.epoch) + ": " + detail::percent(e.ccr);
            md += "| " + std::to_string(f.fold) + " | " + f.test_id + " | " + detail::percent(f.final_ccr) + " | " +
                  epochs + " |\n";
        }
        md += "\n## Per-class CCR of the final-epoch predictions\n\n| class | correct | total | CCR |\n|---|---|---|---|\n";
        for (int k = 0; k < coding.num_classes(); ++k) {
            const auto total = pooled.row_sum(k);
            md += "| " + coding.name(coding.code_of(k)) + " | " + std::to_string(pooled.at(k, k)) + " | " +
                  std::to_string(total) + " | " +
                  (total ? detail::percent(static_cast<double>(pooled.at(k, k)) / static_cast<double>(total))
                         : std::string("n/a")) +
                  " |\n";
        }
        md += "\n![confusion](confusion.png)\n\n## Overlays\n\nGround truth on the left, prediction on the right.\n\n";
        for (const auto& p : bundle.overlays)
            md += "![" + p.stem().string() + "](" + p.filename().string() + ")\n";
        md += "\n";
    }

    if (has_matrix) {
        const auto m = metrics::ErrorMatrix::load_csv(run_dir / "error_matrix.csv");
        bundle.error_matrix_png = out_dir / "error_matrix.png";
        data::write_mat(bundle.error_matrix_png, render_error_matrix(m));
        md += "## HOSVD error matrix\n\n";
        md += "| statistic | value |\n|---|---|\n";
        md += "| self-train mean (diagonal) | " + detail::percent(m.diagonal_mean()) + " |\n";
        md += "| cross-train mean (off-diagonal) | " + detail::percent(m.off_diagonal_mean()) + " |\n";
        md += "| best cross-train mean | " + detail::percent(m.best_cross_mean()) + " |\n";
        md += "| diagonal maximal, by test image | " + detail::percent(m.diagonal_max_rate_by_test()) + " |\n";
        md += "| diagonal maximal, by training image | " + detail::percent(m.diagonal_max_rate_by_train()) + " |\n";
        md += "\n![error matrix](error_matrix.png)\n\n";
    }

    md += "## Palette\n\n" + detail::palette_table(coding) +
          "\nBackground is transparent; overlap pixels are drawn as grey diagonal stripes.\n";
    bundle.document = out_dir / "report.md";
    write_text_file(bundle.document, md);
    spdlog::info("report written to {}", bundle.document.string());
    return bundle;
}

} // namespace mfish::report
