#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mfish/core/json_io.hpp"
#include "mfish/data/manifest.hpp"
#include "mfish/data/preprocess.hpp"
#include "mfish/data/synth.hpp"
#include "mfish/hosvd/classifier.hpp"
#include "mfish/report/bundle.hpp"
#include "mfish/segnet/checkpoint.hpp"
#include "mfish/train/loocv.hpp"

namespace mfish::cli {

struct PreprocessOptions {
    int crop_width = 536; ///< clipped to the frame when the frame is smaller
    int crop_height = 490;
    double scale = 0.70;
};

/// Every parameter a command can take. Each command writes the resolved
/// bundle as config.json beside its outputs.
struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    int workers = 1;
    bool resume = false;
    std::vector<int> folds; ///< LOOCV fold subset; empty runs all folds
    std::optional<std::size_t> expected_count;
    train::TrainConfig train{};
    segnet::NetworkConfig network = segnet::NetworkConfig::standard();
    hosvd::HosvdParams hosvd{};
    PreprocessOptions preprocess{};
    data::SynthConfig synth{};
    int synth_count = 8;
};

inline nlohmann::json hosvd_to_json(const hosvd::HosvdParams& p)
{
    return {{"n_patches", p.n_patches},
            {"patch_size", p.patch_size},
            {"ranks", p.ranks},
            {"basis_tolerance", p.basis_tolerance}};
}

inline void hosvd_from_json(const nlohmann::json& j, hosvd::HosvdParams& p)
{
    p.n_patches = j.value("n_patches", p.n_patches);
    p.patch_size = j.value("patch_size", p.patch_size);
    if (j.contains("ranks"))
        p.ranks = j.at("ranks").get<std::array<int, 4>>();
    p.basis_tolerance = j.value("basis_tolerance", p.basis_tolerance);
}

inline void to_json(nlohmann::json& j, const RunConfig& c)
{
    j = {{"manifest", c.manifest.generic_string()},
         {"out", c.out.generic_string()},
         {"seed", c.seed},
         {"workers", c.workers},
         {"resume", c.resume},
         {"folds", c.folds},
         {"train", c.train},
         {"network", c.network},
         {"hosvd", hosvd_to_json(c.hosvd)},
         {"preprocess",
          {{"crop_width", c.preprocess.crop_width},
           {"crop_height", c.preprocess.crop_height},
           {"scale", c.preprocess.scale}}},
         {"synth", c.synth},
         {"synth_count", c.synth_count}};
    j["expected_count"] = c.expected_count ? nlohmann::json(*c.expected_count) : nlohmann::json(nullptr);
}

/// Missing keys keep their defaults, so a config file may hold any subset.
inline void from_json(const nlohmann::json& j, RunConfig& c)
{
    if (j.contains("manifest"))
        c.manifest = j.at("manifest").get<std::string>();
    if (j.contains("out"))
        c.out = j.at("out").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.resume = j.value("resume", c.resume);
    c.folds = j.value("folds", c.folds);
    if (j.contains("expected_count") && !j.at("expected_count").is_null())
        c.expected_count = j.at("expected_count").get<std::size_t>();
    if (j.contains("train"))
        from_json(j.at("train"), c.train);
    if (j.contains("network"))
        c.network = j.at("network").get<segnet::NetworkConfig>();
    if (j.contains("hosvd"))
        hosvd_from_json(j.at("hosvd"), c.hosvd);
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        c.preprocess.crop_width = p.value("crop_width", c.preprocess.crop_width);
        c.preprocess.crop_height = p.value("crop_height", c.preprocess.crop_height);
        c.preprocess.scale = p.value("scale", c.preprocess.scale);
    }
    if (j.contains("synth"))
        from_json(j.at("synth"), c.synth);
    c.synth_count = j.value("synth_count", c.synth_count);
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return read_json(path).get<RunConfig>(); }

namespace detail {

inline void require_out(const RunConfig& c)
{
    if (c.out.empty())
        throw ValidationError("an output directory (--out) is required");
}

inline void write_resolved(const RunConfig& c) { write_json(c.out / "config.json", c); }

/// Curated samples of the run's manifest. The global seed and worker count
/// are folded into the training config here.
inline std::vector<data::MfishSample> load_manifest_samples(const RunConfig& c, const data::LabelCoding& coding)
{
    if (c.manifest.empty())
        throw IoError("a dataset manifest (--manifest) is required");
    if (!std::filesystem::exists(c.manifest))
        throw IoError("manifest not found: " + c.manifest.string());
    auto manifest = data::DatasetManifest::load(c.manifest);
    if (c.expected_count)
        manifest.expected_count = c.expected_count;
    return data::curate(manifest, coding, c.workers);
}

inline train::TrainConfig resolved_train(const RunConfig& c)
{
    auto t = c.train;
    t.seed = c.seed;
    t.workers = c.workers;
    return t;
}

} // namespace detail

/// Writes a synthetic dataset (16-bit PNG rasters plus manifest.json).
inline std::filesystem::path cmd_synth(RunConfig c)
{
    detail::require_out(c);
    c.synth.seed = c.seed;
    const auto samples = data::synth_dataset(c.synth, c.synth_count);
    const auto manifest = data::write_dataset(samples, c.out);
    c.manifest = manifest;
    detail::write_resolved(c);
    spdlog::info("wrote {} synthetic samples to {}", samples.size(), c.out.string());
    return manifest;
}

/// Curates and preprocesses the manifest into a cache directory holding the
/// preprocessed rasters, a manifest for them and summary.json. Re-running
/// with the same inputs rewrites identical files.
inline nlohmann::json cmd_ingest(RunConfig c)
{
    detail::require_out(c);
    const data::LabelCoding coding;
    const auto samples = detail::load_manifest_samples(c, coding);
    if (samples.empty())
        throw ValidationError("ingest: no samples left after curation");
    const auto crop =
        data::dataset_crop_window(samples, coding, c.preprocess.crop_width, c.preprocess.crop_height);
    std::vector<data::MfishSample> processed(samples.size());
    parallel_for(samples.size(), c.workers,
                 [&](std::size_t i) { processed[i] = data::preprocess(samples[i], crop, c.preprocess.scale); });
    const auto manifest = data::write_dataset(processed, c.out / "samples");

    std::vector<std::uint64_t> totals(coding.num_classes(), 0);
    nlohmann::json per_sample = nlohmann::json::array();
    for (const auto& s : processed) {
        std::vector<std::uint64_t> counts(coding.num_classes(), 0);
        std::uint64_t background = 0, overlap = 0;
        for (int v : s.labels.pixels) {
            if (const int k = coding.class_index(v); k >= 0)
                ++counts[k];
            else if (v == coding.overlap_code())
                ++overlap;
            else
                ++background;
        }
        for (int k = 0; k < coding.num_classes(); ++k)
            totals[k] += counts[k];
        per_sample.push_back({{"id", s.id}, {"class_pixels", counts}, {"background", background}, {"overlap", overlap}});
    }
    nlohmann::json histogram = nlohmann::json::object();
    for (int k = 0; k < coding.num_classes(); ++k)
        histogram[coding.name(coding.code_of(k))] = totals[k];
    const nlohmann::json summary = {
        {"sample_count", processed.size()},
        {"crop", {{"x", crop.x}, {"y", crop.y}, {"width", crop.width}, {"height", crop.height}}},
        {"scale", c.preprocess.scale},
        {"output_size", {{"width", processed[0].width()}, {"height", processed[0].height()}}},
        {"manifest", "samples/manifest.json"},
        {"class_pixels", histogram},
        {"samples", per_sample}};
    write_json(c.out / "summary.json", summary);
    detail::write_resolved(c);
    spdlog::info("ingested {} samples into {} ({}x{})", processed.size(), manifest.string(), processed[0].width(),
                 processed[0].height());
    return summary;
}

/// Trains one model on every curated sample and stores it with its log.
inline nlohmann::json cmd_train(RunConfig c)
{
    detail::require_out(c);
    const data::LabelCoding coding;
    const auto samples = detail::load_manifest_samples(c, coding);
    const auto tcfg = detail::resolved_train(c);
    std::filesystem::create_directories(c.out);
    detail::write_resolved(c);
    std::string log = "fold,epoch,mean_loss,test_ccr\n";
    auto result = train::train_model<float>(samples, coding, tcfg, c.network, [&](const train::EpochContext<float>& ctx) {
        log += "-1," + std::to_string(ctx.record.epoch) + "," + train::detail::csv_number(ctx.record.mean_loss) + ",\n";
        write_text_file(c.out / "log.csv", log);
        return true;
    });
    segnet::save_checkpoint(c.out / "model.ckpt", result.net, &result.optimizer,
                            {{"epochs", result.log.epochs.size()}, {"seed", c.seed}});
    const auto ev = train::evaluate_model(result.net, std::span<const data::MfishSample>(samples), coding);
    const nlohmann::json summary = {{"epochs", result.log.epochs.size()},
                                    {"final_loss", result.log.epochs.empty() ? 0.0 : result.log.epochs.back().mean_loss},
                                    {"train_ccr", ev.report.to_json(coding)},
                                    {"checkpoint", "model.ckpt"}};
    write_json(c.out / "train_summary.json", summary);
    return summary;
}

inline train::LoocvSummary cmd_loocv(RunConfig c)
{
    detail::require_out(c);
    const data::LabelCoding coding;
    const auto samples = detail::load_manifest_samples(c, coding);
    std::filesystem::create_directories(c.out);
    detail::write_resolved(c);
    train::LoocvOptions opts;
    opts.out_dir = c.out;
    opts.resume = c.resume;
    opts.folds = c.folds;
    return train::run_loocv<float>(samples, coding, detail::resolved_train(c), c.network, opts);
}

/// Writes error_matrix.csv, error_matrix.png and error_matrix_summary.json.
inline metrics::ErrorMatrix cmd_hosvd_matrix(RunConfig c)
{
    detail::require_out(c);
    const data::LabelCoding coding;
    const auto samples = detail::load_manifest_samples(c, coding);
    std::filesystem::create_directories(c.out);
    detail::write_resolved(c);
    const auto m = hosvd::cross_image_matrix(samples, coding, c.hosvd, c.seed, c.workers);
    m.save_csv(c.out / "error_matrix.csv");
    data::write_mat(c.out / "error_matrix.png", report::render_error_matrix(m));
    write_json(c.out / "error_matrix_summary.json", m.summary());
    return m;
}

inline report::ReportBundle cmd_report(const std::filesystem::path& run_dir)
{
    return report::build_report(run_dir);
}

} // namespace mfish::cli
