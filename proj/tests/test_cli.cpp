#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "mfish/cli/commands.hpp"

using namespace mfish;
using namespace mfish::cli;

namespace {

std::filesystem::path fresh_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

RunConfig small_run(const std::filesystem::path& root, int count)
{
    RunConfig c;
    c.seed = 21;
    c.synth.height = 32;
    c.synth.width = 48;
    c.synth_count = count;
    c.out = root / "data";
    c.manifest = cmd_synth(c);
    c.train.epochs = 3;
    c.train.eval_last_k = 2;
    c.train.batch_size = 2;
    c.train.augmentation.enabled = false;
    c.network = segnet::NetworkConfig::scaled(8, 16, 16);
    c.hosvd.patch_size = 5;
    c.hosvd.n_patches = 10;
    return c;
}

int run_binary(const std::string& args)
{
    const std::string cmd = std::string(MFISHSEG_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(RunConfig, JsonRoundTrip)
{
    RunConfig c;
    c.manifest = "/data/m.json";
    c.seed = 99;
    c.folds = {1, 3};
    c.expected_count = 65;
    c.train.epochs = 12;
    c.network = segnet::NetworkConfig::scaled(4, 8, 16);
    c.hosvd.ranks = {10, 3, 3, 2};
    c.preprocess.scale = 0.5;
    c.synth.noise_sd = 0.125;
    const nlohmann::json j = c;
    const auto back = j.get<RunConfig>();
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_EQ(back.network, c.network);
    EXPECT_EQ(back.expected_count, c.expected_count);
    // A partial file leaves everything else at its default.
    const auto partial = nlohmann::json{{"seed", 4}}.get<RunConfig>();
    EXPECT_EQ(partial.seed, 4u);
    EXPECT_EQ(partial.train.epochs, 150);
    EXPECT_EQ(partial.network, segnet::NetworkConfig::standard());
}

TEST(Ingest, WritesCacheAndSummaryIdempotently)
{
    const auto root = fresh_dir("mfish_cli_ingest");
    auto c = small_run(root, 3);
    c.out = root / "cache";
    const auto summary = cmd_ingest(c);
    EXPECT_EQ(summary.at("sample_count").get<int>(), 3);
    EXPECT_EQ(summary.at("output_size").at("width").get<int>(), data::scaled_extent(48, 0.7));
    EXPECT_EQ(summary.at("output_size").at("height").get<int>(), data::scaled_extent(32, 0.7));
    EXPECT_TRUE(std::filesystem::exists(root / "cache" / "config.json"));

    const auto first = read_text_file(root / "cache" / "samples" / "SYN01_labels.png");
    const auto first_summary = read_text_file(root / "cache" / "summary.json");
    cmd_ingest(c);
    EXPECT_EQ(read_text_file(root / "cache" / "samples" / "SYN01_labels.png"), first);
    EXPECT_EQ(read_text_file(root / "cache" / "summary.json"), first_summary);

    // The cache is itself a loadable dataset.
    RunConfig again = c;
    again.manifest = root / "cache" / "samples" / "manifest.json";
    again.out = root / "cache2";
    again.preprocess.scale = 1.0;
    EXPECT_EQ(cmd_ingest(again).at("sample_count").get<int>(), 3);
    std::filesystem::remove_all(root);
}

TEST(Binary, ExitStatus)
{
    const auto root = fresh_dir("mfish_cli_exit");
    EXPECT_EQ(run_binary("ingest --manifest " + (root / "missing.json").string() + " --out " + root.string()), 2);
    EXPECT_EQ(run_binary("report " + (root / "nothing").string()), 2);
    EXPECT_NE(run_binary("frobnicate"), 0);
    EXPECT_EQ(run_binary("synth --count 2 --height 32 --width 48 -q --out " + (root / "d").string()), 0);
    EXPECT_TRUE(std::filesystem::exists(root / "d" / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(root / "d" / "config.json"));
    std::filesystem::remove_all(root);
}

TEST(Loocv, FoldDirectoriesResumeAndDeterminism)
{
    const auto root = fresh_dir("mfish_cli_loocv");
    auto c = small_run(root, 4);
    c.out = root / "run1";
    const auto s1 = cmd_loocv(c);
    std::set<std::string> dirs;
    for (const auto& e : std::filesystem::directory_iterator(c.out))
        if (e.is_directory())
            dirs.insert(e.path().filename().string());
    EXPECT_EQ(dirs, (std::set<std::string>{"fold_000_SYN00", "fold_001_SYN01", "fold_002_SYN02", "fold_003_SYN03"}));
    EXPECT_EQ(load_run_config(c.out / "config.json").train.epochs, 3);

    c.out = root / "run2";
    const auto s2 = cmd_loocv(c);
    EXPECT_EQ(s1.mean_ccr, s2.mean_ccr);
    for (std::size_t f = 0; f < 4; ++f)
        EXPECT_EQ(s1.folds[f].final_ccr, s2.folds[f].final_ccr);

    // Resuming after deleting one fold recomputes exactly that fold.
    std::filesystem::remove_all(c.out / "fold_002_SYN02");
    c.resume = true;
    const auto s3 = cmd_loocv(c);
    EXPECT_EQ(s3.mean_ccr, s1.mean_ccr);
    std::filesystem::remove_all(root);
}

TEST(HosvdMatrix, CsvAndHeatmap)
{
    const auto root = fresh_dir("mfish_cli_hosvd");
    auto c = small_run(root, 3);
    c.out = root / "hosvd";
    const auto m = cmd_hosvd_matrix(c);
    ASSERT_EQ(m.size(), 3u);
    const auto back = metrics::ErrorMatrix::load_csv(c.out / "error_matrix.csv");
    EXPECT_EQ(back.ids, m.ids);
    for (std::size_t i = 0; i < m.values.size(); ++i)
        EXPECT_NEAR(back.values[i], m.values[i], 1e-12);
    const auto png = cv::imread((c.out / "error_matrix.png").string());
    const auto layout = report::heatmap_layout(3, 3, m.ids, m.ids);
    EXPECT_EQ(png.cols, layout.width());
    EXPECT_EQ(png.rows, layout.height());

    c.manifest = root / "one" / "manifest.json";
    auto one = data::synth_dataset(c.synth, 1);
    data::write_dataset(one, root / "one");
    EXPECT_THROW(cmd_hosvd_matrix(c), ValidationError);
    std::filesystem::remove_all(root);
}

TEST(Report, OverlaysPaletteAndConsistentCcr)
{
    const auto root = fresh_dir("mfish_cli_report");
    auto c = small_run(root, 3);
    c.out = root / "run";
    const auto s = cmd_loocv(c);
    const auto b = cmd_report(c.out);
    ASSERT_EQ(b.overlays.size(), 3u);
    ASSERT_EQ(b.folds.size(), 3u);
    const auto md = read_text_file(b.document);
    for (const auto& f : s.folds)
        EXPECT_NE(md.find("| " + f.test_id + " | " + report::detail::percent(f.final_ccr) + " |"), std::string::npos);
    EXPECT_EQ(b.mean_ccr, s.mean_ccr);

    // Left half of the overlay is the ground truth in the fixed palette.
    const data::LabelCoding coding;
    const auto truth = data::read_labels(c.out / "fold_000_SYN00" / "truth.png");
    const auto overlay = cv::imread(b.overlays[0].string(), cv::IMREAD_UNCHANGED);
    ASSERT_EQ(overlay.type(), CV_8UC4);
    for (int y = 0; y < truth.height; ++y)
        for (int x = 0; x < truth.width; ++x) {
            const auto px = overlay.at<cv::Vec4b>(y, x);
            const int k = coding.class_index(truth.at(y, x));
            if (k >= 0) {
                const auto col = report::class_color(k);
                EXPECT_EQ(px, cv::Vec4b(col.b, col.g, col.r, 255));
            } else if (truth.at(y, x) == coding.background_code()) {
                EXPECT_EQ(px[3], 0);
            }
        }

    // Rendering again gives the same bytes.
    const auto first = read_text_file(b.overlays[1]);
    cmd_report(c.out);
    EXPECT_EQ(read_text_file(b.overlays[1]), first);

    std::filesystem::remove(c.out / "fold_001_SYN01" / "prediction.png");
    EXPECT_THROW(cmd_report(c.out), IoError);
    std::filesystem::remove_all(root);
}

TEST(Palette, TwentyFourDistinctColours)
{
    std::set<std::string> hex;
    for (int k = 0; k < 24; ++k)
        hex.insert(report::to_hex(report::class_color(k)));
    EXPECT_EQ(hex.size(), 24u);
    EXPECT_EQ(report::to_hex(report::class_color(0)), "#e6194b");
    EXPECT_THROW(report::class_color(24), ValidationError);
}

TEST(Palette, OverlapIsHatchedAndBackgroundTransparent)
{
    const data::LabelCoding coding;
    data::LabelMap m(8, 8, coding.overlap_code());
    m.at(0, 0) = coding.background_code();
    const auto img = report::colorize(m, coding);
    EXPECT_EQ(img.at<cv::Vec4b>(0, 0)[3], 0);
    int striped = 0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (!(y == 0 && x == 0) && img.at<cv::Vec4b>(y, x)[3] == 255)
                ++striped;
    EXPECT_GT(striped, 0);
    EXPECT_LT(striped, 63);
}
