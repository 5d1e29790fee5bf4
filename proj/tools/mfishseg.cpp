// mfishseg: command-line front end for the mFISH segmentation toolkit.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mfish/cli/commands.hpp"

namespace {

using mfish::cli::RunConfig;

/// Flags shared by several subcommands. A flag overrides the --config file
/// only when it was given on the command line.
struct CommonFlags {
    std::string config_path;
    std::string manifest;
    std::string out;
    std::uint64_t seed = 0;
    int workers = 1;
    int epochs = 0;
    int batch_size = 0;
    bool resume = false;
};

struct Options {
    CLI::Option* manifest = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* workers = nullptr;
    CLI::Option* epochs = nullptr;
    CLI::Option* batch_size = nullptr;
    CLI::Option* resume = nullptr;
};

Options add_common(CLI::App* app, CommonFlags& f, bool training)
{
    Options o;
    app->add_option("--config", f.config_path, "JSON run configuration (flags override it)")->check(CLI::ExistingFile);
    o.manifest = app->add_option("--manifest", f.manifest, "dataset manifest JSON");
    o.out = app->add_option("--out", f.out, "output directory");
    o.seed = app->add_option("--seed", f.seed, "master random seed");
    o.workers = app->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    if (training) {
        o.epochs = app->add_option("--epochs", f.epochs, "training epochs")->check(CLI::NonNegativeNumber);
        o.batch_size = app->add_option("--batch-size", f.batch_size, "images per batch")->check(CLI::PositiveNumber);
        o.resume = app->add_flag("--resume", f.resume, "skip folds whose results already exist");
    }
    return o;
}

RunConfig resolve(const CommonFlags& f, const Options& o)
{
    RunConfig c = f.config_path.empty() ? RunConfig{} : mfish::cli::load_run_config(f.config_path);
    if (o.manifest && o.manifest->count())
        c.manifest = f.manifest;
    if (o.out && o.out->count())
        c.out = f.out;
    if (o.seed && o.seed->count())
        c.seed = f.seed;
    if (o.workers && o.workers->count())
        c.workers = f.workers;
    if (o.epochs && o.epochs->count())
        c.train.epochs = f.epochs;
    if (o.batch_size && o.batch_size->count())
        c.train.batch_size = f.batch_size;
    if (o.resume && o.resume->count())
        c.resume = f.resume;
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Semantic segmentation of 6-channel mFISH images"};
    app.require_subcommand(1);
    app.fallthrough();
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");

    // synth
    CommonFlags synth_f;
    int synth_count = 8, synth_h = 0, synth_w = 0, synth_classes = 0;
    double synth_noise = -1, synth_offset = -1;
    auto* synth = app.add_subcommand("synth", "generate a synthetic mFISH dataset");
    const auto synth_o = add_common(synth, synth_f, false);
    auto* synth_count_opt = synth->add_option("--count", synth_count, "number of images")->check(CLI::PositiveNumber);
    synth->add_option("--height", synth_h, "image height")->check(CLI::PositiveNumber);
    synth->add_option("--width", synth_w, "image width")->check(CLI::PositiveNumber);
    synth->add_option("--classes", synth_classes, "chromosome classes present (1-24)")->check(CLI::Range(1, 24));
    synth->add_option("--noise", synth_noise, "Gaussian noise standard deviation")->check(CLI::NonNegativeNumber);
    synth->add_option("--exposure-offset", synth_offset, "per-image gain spread, e.g. 0.05 for +/-5%")
        ->check(CLI::Range(0.0, 1.0));

    // ingest
    CommonFlags ingest_f;
    int crop_w = 0, crop_h = 0;
    double scale = 0;
    std::size_t expected = 0;
    auto* ingest = app.add_subcommand("ingest", "curate and preprocess a dataset into a cache");
    const auto ingest_o = add_common(ingest, ingest_f, false);
    auto* crop_w_opt = ingest->add_option("--crop-width", crop_w, "crop width in pixels")->check(CLI::PositiveNumber);
    auto* crop_h_opt = ingest->add_option("--crop-height", crop_h, "crop height in pixels")->check(CLI::PositiveNumber);
    auto* scale_opt = ingest->add_option("--scale", scale, "resampling factor in (0, 1]")->check(CLI::Range(1e-6, 1.0));
    auto* expected_opt =
        ingest->add_option("--expected-count", expected, "fail unless curation keeps exactly this many samples");

    // train / loocv
    auto add_training_extras = [](CLI::App* cmd, double& lr, int& last_k, bool& no_augment, std::string& widths) {
        cmd->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
        cmd->add_option("--eval-last-k", last_k, "epochs averaged for the test CCR")->check(CLI::PositiveNumber);
        cmd->add_flag("--no-augment", no_augment, "disable random rotation/scale/translation");
        cmd->add_option("--widths", widths, "filter widths s1,s2,aspp for a scaled network (default 64,128,256)");
    };
    auto apply_training_extras = [](RunConfig& c, CLI::App* cmd, double lr, int last_k, bool no_augment,
                                    const std::string& widths) {
        if (cmd->get_option("--lr")->count())
            c.train.optimizer.lr = lr;
        if (cmd->get_option("--eval-last-k")->count())
            c.train.eval_last_k = last_k;
        if (no_augment)
            c.train.augmentation.enabled = false;
        if (!widths.empty()) {
            int a = 0, b = 0, d = 0;
            if (std::sscanf(widths.c_str(), "%d,%d,%d", &a, &b, &d) != 3 || a <= 0 || b <= 0 || d <= 0)
                throw mfish::ValidationError("--widths expects three positive integers, e.g. 16,32,64");
            c.network = mfish::segnet::NetworkConfig::scaled(a, b, d);
        }
    };

    CommonFlags train_f;
    double train_lr = 0;
    int train_k = 0;
    bool train_no_aug = false;
    std::string train_widths;
    auto* train = app.add_subcommand("train", "train one model on every curated sample");
    const auto train_o = add_common(train, train_f, true);
    add_training_extras(train, train_lr, train_k, train_no_aug, train_widths);

    CommonFlags loocv_f;
    double loocv_lr = 0;
    int loocv_k = 0;
    bool loocv_no_aug = false;
    std::string loocv_widths;
    std::vector<int> folds;
    auto* loocv = app.add_subcommand("loocv", "leave-one-out cross-validation");
    const auto loocv_o = add_common(loocv, loocv_f, true);
    add_training_extras(loocv, loocv_lr, loocv_k, loocv_no_aug, loocv_widths);
    loocv->add_option("--folds", folds, "run only these fold indices (for spreading folds over processes)")
        ->delimiter(',');

    // hosvd-matrix
    CommonFlags hosvd_f;
    int patch_size = 0, patches = 0;
    std::vector<int> ranks;
    auto* hosvd = app.add_subcommand("hosvd-matrix", "HOSVD train-image x test-image CCR matrix");
    const auto hosvd_o = add_common(hosvd, hosvd_f, false);
    hosvd->add_option("--patch-size", patch_size, "odd patch edge length")->check(CLI::PositiveNumber);
    hosvd->add_option("--patches", patches, "patches per class and image")->check(CLI::PositiveNumber);
    hosvd->add_option("--ranks", ranks, "ranks for (patch, row, column, channel)")->delimiter(',')->expected(4);

    // report
    std::string run_dir;
    auto* rep = app.add_subcommand("report", "render overlays, heatmaps and CCR tables for a run");
    rep->add_option("run_dir", run_dir, "directory written by loocv or hosvd-matrix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        if (*synth) {
            auto c = resolve(synth_f, synth_o);
            if (synth_count_opt->count())
                c.synth_count = synth_count;
            if (synth_h)
                c.synth.height = synth_h;
            if (synth_w)
                c.synth.width = synth_w;
            if (synth_classes)
                c.synth.num_classes = synth_classes;
            if (synth_noise >= 0)
                c.synth.noise_sd = synth_noise;
            if (synth_offset >= 0)
                c.synth.exposure_offset = synth_offset;
            mfish::cli::cmd_synth(c);
        } else if (*ingest) {
            auto c = resolve(ingest_f, ingest_o);
            if (crop_w_opt->count())
                c.preprocess.crop_width = crop_w;
            if (crop_h_opt->count())
                c.preprocess.crop_height = crop_h;
            if (scale_opt->count())
                c.preprocess.scale = scale;
            if (expected_opt->count())
                c.expected_count = expected;
            mfish::cli::cmd_ingest(c);
        } else if (*train) {
            auto c = resolve(train_f, train_o);
            apply_training_extras(c, train, train_lr, train_k, train_no_aug, train_widths);
            const auto s = mfish::cli::cmd_train(c);
            std::printf("train CCR %.4f\n", s.at("train_ccr").at("ccr").get<double>());
        } else if (*loocv) {
            auto c = resolve(loocv_f, loocv_o);
            apply_training_extras(c, loocv, loocv_lr, loocv_k, loocv_no_aug, loocv_widths);
            if (!folds.empty())
                c.folds = folds;
            const auto s = mfish::cli::cmd_loocv(c);
            for (const auto& f : s.folds)
                std::printf("fold %3d  %-12s  CCR %.4f\n", f.fold, f.test_id.c_str(), f.final_ccr);
            std::printf("mean CCR %.4f  pooled CCR %.4f\n", s.mean_ccr, s.pooled_ccr);
        } else if (*hosvd) {
            auto c = resolve(hosvd_f, hosvd_o);
            if (patch_size)
                c.hosvd.patch_size = patch_size;
            if (patches)
                c.hosvd.n_patches = patches;
            if (!ranks.empty())
                std::copy(ranks.begin(), ranks.end(), c.hosvd.ranks.begin());
            const auto m = mfish::cli::cmd_hosvd_matrix(c);
            std::printf("%s\n", m.summary().dump(2).c_str());
        } else if (*rep) {
            const auto b = mfish::cli::cmd_report(run_dir);
            std::printf("%s\n", b.document.string().c_str());
        }
    } catch (const mfish::IoError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
