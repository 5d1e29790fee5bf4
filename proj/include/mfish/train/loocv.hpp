#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mfish/core/json_io.hpp"
#include "mfish/data/raster_io.hpp"
#include "mfish/metrics/ccr.hpp"
#include "mfish/segnet/checkpoint.hpp"
#include "mfish/train/train.hpp"

namespace mfish::train {

struct EpochCcr {
    int epoch = 0;
    double ccr = 0.0;
    std::uint64_t correct = 0;
    std::uint64_t total = 0;

    friend bool operator==(const EpochCcr&, const EpochCcr&) = default;
};

struct FoldResult {
    int fold = 0;
    std::string test_id;
    std::vector<std::string> train_ids;
    std::vector<double> epoch_loss;      ///< mean training loss of every epoch
    std::vector<EpochCcr> per_epoch_ccr; ///< test CCR for each of the last eval_last_k epochs
    double final_ccr = 0.0;              ///< mean of per_epoch_ccr
    std::string checkpoint_path;         ///< model after the last epoch; empty when nothing was saved

    friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

inline void to_json(nlohmann::json& j, const EpochCcr& e)
{
    j = {{"epoch", e.epoch}, {"ccr", e.ccr}, {"correct", e.correct}, {"total", e.total}};
}

inline void from_json(const nlohmann::json& j, EpochCcr& e)
{
    e.epoch = j.at("epoch").get<int>();
    e.ccr = j.at("ccr").get<double>();
    e.correct = j.at("correct").get<std::uint64_t>();
    e.total = j.at("total").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const FoldResult& f)
{
    j = {{"fold", f.fold},
         {"test_id", f.test_id},
         {"train_ids", f.train_ids},
         {"epoch_loss", f.epoch_loss},
         {"per_epoch_ccr", f.per_epoch_ccr},
         {"final_ccr", f.final_ccr},
         {"checkpoint_path", f.checkpoint_path}};
}

inline void from_json(const nlohmann::json& j, FoldResult& f)
{
    f.fold = j.at("fold").get<int>();
    f.test_id = j.at("test_id").get<std::string>();
    f.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    f.epoch_loss = j.value("epoch_loss", std::vector<double>{});
    f.per_epoch_ccr = j.at("per_epoch_ccr").get<std::vector<EpochCcr>>();
    f.final_ccr = j.at("final_ccr").get<double>();
    f.checkpoint_path = j.value("checkpoint_path", std::string{});
}

struct LoocvSummary {
    std::vector<FoldResult> folds;
    double mean_ccr = 0.0;   ///< mean of final_ccr over folds (headline)
    double pooled_ccr = 0.0; ///< pixel counts pooled over folds and evaluated epochs

    nlohmann::json to_json() const
    {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& f : folds)
            rows.push_back({{"fold", f.fold}, {"test_id", f.test_id}, {"final_ccr", f.final_ccr}});
        return {{"folds", rows}, {"fold_count", folds.size()}, {"mean_ccr", mean_ccr}, {"pooled_ccr", pooled_ccr}};
    }

    std::string to_csv() const
    {
        std::string out = "fold,test_id,final_ccr\n";
        char buf[64];
        for (const auto& f : folds) {
            std::snprintf(buf, sizeof buf, "%.17g", f.final_ccr);
            out += std::to_string(f.fold) + "," + f.test_id + "," + buf + "\n";
        }
        return out;
    }
};

/// Aggregates fold results in fold order; the outcome does not depend on the
/// order the folds were supplied in.
inline LoocvSummary summarize(std::vector<FoldResult> folds)
{
    if (folds.empty())
        throw ValidationError("LOOCV summary: no folds");
    std::sort(folds.begin(), folds.end(), [](const FoldResult& a, const FoldResult& b) { return a.fold < b.fold; });
    LoocvSummary s;
    double sum = 0.0;
    std::uint64_t correct = 0, total = 0;
    for (const auto& f : folds) {
        sum += f.final_ccr;
        for (const auto& e : f.per_epoch_ccr) {
            correct += e.correct;
            total += e.total;
        }
    }
    s.mean_ccr = sum / static_cast<double>(folds.size());
    s.pooled_ccr = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    s.folds = std::move(folds);
    return s;
}

struct LoocvOptions {
    std::filesystem::path out_dir; ///< empty: keep everything in memory
    bool resume = false;           ///< reuse folds whose fold_result.json already exists
    bool save_checkpoints = true;
    std::vector<int> folds; ///< subset of fold indices to run; empty means all
};

inline std::string fold_dir_name(int fold, const std::string& id)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "fold_%03d_", fold);
    return buf + id;
}

namespace detail {

[[noreturn]] inline void rethrow_with_context(const std::string& context)
{
    try {
        throw;
    } catch (const DivergenceError& e) {
        throw DivergenceError(context + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(context + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(context + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(context + ": " + e.what());
    }
}

inline std::string csv_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Trains on every sample but `fold` and evaluates on it after each of the
/// last eval_last_k epochs.
template <class T = float>
FoldResult run_fold(std::span<const data::MfishSample> samples, int fold, const data::LabelCoding& coding,
                    const TrainConfig& config, const segnet::NetworkConfig& net_config,
                    const std::filesystem::path& fold_dir = {}, bool save_checkpoints = true)
{
    const auto& test = samples[fold];
    std::vector<data::MfishSample> train_set;
    FoldResult r;
    r.fold = fold;
    r.test_id = test.id;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (static_cast<int>(i) != fold) {
            train_set.push_back(samples[i]);
            r.train_ids.push_back(samples[i].id);
        }
    if (std::find(r.train_ids.begin(), r.train_ids.end(), test.id) != r.train_ids.end())
        throw ValidationError("LOOCV leak: training set of fold " + std::to_string(fold) + " contains " + test.id);

    TrainConfig fold_config = config;
    fold_config.seed = mix_seed({config.seed, hash_string(test.id)});
    const bool on_disk = !fold_dir.empty();
    std::string log = "fold,epoch,mean_loss,test_ccr\n";
    double best_loss = std::numeric_limits<double>::infinity();
    const int first_eval = config.epochs - config.eval_last_k + 1;
    const std::vector<data::MfishSample> test_set{test};

    auto hook = [&](const EpochContext<T>& ctx) {
        const int e = ctx.record.epoch;
        r.epoch_loss.push_back(ctx.record.mean_loss);
        std::string ccr_cell;
        if (e >= first_eval) {
            const auto ev = evaluate_model(ctx.net, std::span<const data::MfishSample>(test_set), coding);
            r.per_epoch_ccr.push_back({e, ev.report.ccr, ev.report.correct, ev.report.total});
            ccr_cell = detail::csv_number(ev.report.ccr);
        }
        log += std::to_string(fold) + "," + std::to_string(e) + "," + detail::csv_number(ctx.record.mean_loss) + "," +
               ccr_cell + "\n";
        if (on_disk) {
            write_text_file(fold_dir / "log.csv", log);
            if (save_checkpoints) {
                const nlohmann::json extra = {{"fold", fold}, {"epoch", e}, {"test_id", test.id}};
                if (e >= first_eval) {
                    char name[32];
                    std::snprintf(name, sizeof name, "epoch_%04d.ckpt", e);
                    segnet::save_checkpoint(fold_dir / name, ctx.net, &ctx.optimizer, extra);
                    if (e == config.epochs)
                        r.checkpoint_path = (fold_dir / name).string();
                }
                if (ctx.record.mean_loss < best_loss) {
                    best_loss = ctx.record.mean_loss;
                    segnet::save_checkpoint(fold_dir / "best_loss.ckpt", ctx.net, &ctx.optimizer, extra);
                }
            }
        }
        return true;
    };
    auto trained = train_model<T>(train_set, coding, fold_config, net_config, hook);

    if (static_cast<int>(r.per_epoch_ccr.size()) != config.eval_last_k)
        throw Error("fold " + std::to_string(fold) + " evaluated " + std::to_string(r.per_epoch_ccr.size()) +
                    " epochs, expected " + std::to_string(config.eval_last_k));
    std::vector<double> values;
    for (const auto& e : r.per_epoch_ccr)
        values.push_back(e.ccr);
    r.final_ccr = metrics::average_last_k(values, static_cast<std::size_t>(config.eval_last_k));
    if (on_disk) {
        data::write_labels(fold_dir / "prediction.png", segnet::predict_labels(trained.net, test, coding));
        data::write_labels(fold_dir / "truth.png", test.labels);
        write_json(fold_dir / "fold_result.json", r);
    }
    return r;
}

/// Leave-one-out cross-validation: fold i tests on samples[i] with a model
/// trained on every other sample. With an output directory each fold writes
/// its log, checkpoints, final prediction, ground truth and fold_result.json under its own
/// directory, and the summary lands in summary.json / summary.csv.
template <class T = float>
LoocvSummary run_loocv(std::span<const data::MfishSample> samples, const data::LabelCoding& coding,
                       const TrainConfig& config, const segnet::NetworkConfig& net_config,
                       const LoocvOptions& options = {})
{
    config.validate(true);
    net_config.validate();
    if (samples.size() < 2)
        throw ValidationError("LOOCV needs at least two samples, got " + std::to_string(samples.size()));
    std::set<std::string> ids;
    for (const auto& s : samples)
        if (!ids.insert(s.id).second)
            throw ValidationError("LOOCV: duplicate sample id " + s.id);

    std::vector<int> folds = options.folds;
    if (folds.empty())
        for (int i = 0; i < static_cast<int>(samples.size()); ++i)
            folds.push_back(i);
    for (int f : folds)
        if (f < 0 || f >= static_cast<int>(samples.size()))
            throw ValidationError("LOOCV: fold index " + std::to_string(f) + " out of range");

    const bool on_disk = !options.out_dir.empty();
    std::vector<FoldResult> results;
    for (int f : folds) {
        const std::string context = "fold " + std::to_string(f) + " (" + samples[f].id + ")";
        try {
            std::filesystem::path dir;
            if (on_disk) {
                dir = options.out_dir / fold_dir_name(f, samples[f].id);
                const auto done = dir / "fold_result.json";
                if (options.resume && std::filesystem::exists(done)) {
                    auto r = read_json(done).get<FoldResult>();
                    if (r.test_id != samples[f].id)
                        throw ValidationError("resumed result belongs to " + r.test_id);
                    spdlog::info("{}: already complete, final CCR {:.4f}", context, r.final_ccr);
                    results.push_back(std::move(r));
                    continue;
                }
                std::filesystem::create_directories(dir);
            }
            spdlog::info("{}: training on {} samples", context, samples.size() - 1);
            results.push_back(run_fold<T>(samples, f, coding, config, net_config, dir, options.save_checkpoints));
            spdlog::info("{}: final CCR {:.4f}", context, results.back().final_ccr);
        } catch (...) {
            detail::rethrow_with_context(context);
        }
    }
    auto summary = summarize(std::move(results));
    if (on_disk) {
        write_json(options.out_dir / "summary.json", summary.to_json());
        write_text_file(options.out_dir / "summary.csv", summary.to_csv());
    }
    return summary;
}

} // namespace mfish::train
