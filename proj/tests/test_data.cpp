#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "mfish/data/augment.hpp"
#include "mfish/data/batch.hpp"
#include "mfish/data/manifest.hpp"
#include "mfish/data/preprocess.hpp"
#include "mfish/data/synth.hpp"

namespace fs = std::filesystem;
using namespace mfish;
using namespace mfish::data;

namespace {

fs::path scratch_dir(const std::string& name)
{
    auto dir = fs::temp_directory_path() / ("mfish_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Writes a 640x512 8-bit sample whose channel c holds (x + y + c) % 256.
ManifestEntry write_raw_entry(const fs::path& dir, const std::string& id, int label_code = 5)
{
    ManifestEntry e;
    e.id = id;
    for (int c = 0; c < kNumChannels; ++c) {
        cv::Mat m(512, 640, CV_8UC1);
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>((x + y + c) % 256);
        e.channels[c] = dir / (id + "_" + std::string(kChannelNames[c]) + ".png");
        cv::imwrite(e.channels[c].string(), m);
    }
    cv::Mat l(512, 640, CV_8UC1, cv::Scalar(0));
    l(cv::Rect(100, 100, 40, 20)).setTo(label_code);
    e.labels = dir / (id + "_labels.png");
    cv::imwrite(e.labels.string(), l);
    return e;
}

MfishSample small_sample(int h, int w, const std::string& id = "T")
{
    MfishSample s;
    s.id = id;
    s.labels = LabelMap(h, w, 0);
    for (int c = 0; c < kNumChannels; ++c)
        s.channels[c] = Channel(h, w, 0.0f);
    return s;
}

} // namespace

TEST(LabelCoding, DefaultsAndValidation)
{
    LabelCoding coding;
    EXPECT_EQ(coding.num_classes(), 24);
    EXPECT_EQ(coding.background_code(), 0);
    EXPECT_EQ(coding.overlap_code(), 255);
    EXPECT_EQ(coding.class_index(1), 0);
    EXPECT_EQ(coding.class_index(24), 23);
    EXPECT_EQ(coding.class_index(0), -1);
    EXPECT_EQ(coding.class_index(255), -1);
    EXPECT_EQ(coding.name(23), "X");
    EXPECT_EQ(coding.name(24), "Y");

    std::vector<int> dup = coding.chromosome_codes();
    dup[1] = dup[0];
    EXPECT_THROW(LabelCoding(0, 255, dup), ValidationError);
    EXPECT_THROW(LabelCoding(1, 255, coding.chromosome_codes()), ValidationError);
    EXPECT_THROW(LabelCoding(0, 255, std::vector<int>(23, 1)), ValidationError);

    const auto round = LabelCoding::from_json(coding.to_json());
    EXPECT_EQ(round.chromosome_codes(), coding.chromosome_codes());
    EXPECT_EQ(round.overlap_code(), 255);
}

TEST(LoadSample, EightBitFilesNormalised)
{
    const auto dir = scratch_dir("load8");
    const auto e = write_raw_entry(dir, "V0001");
    const auto s = load_sample(e, LabelCoding{});
    EXPECT_EQ(s.height(), 512);
    EXPECT_EQ(s.width(), 640);
    for (int c = 0; c < kNumChannels; ++c) {
        const auto [lo, hi] = std::minmax_element(s.channels[c].pixels.begin(), s.channels[c].pixels.end());
        EXPECT_GE(*lo, 0.0f);
        EXPECT_LE(*hi, 1.0f);
        EXPECT_FLOAT_EQ(s.channels[c].at(3, 7), ((3 + 7 + c) % 256) / 255.0f);
    }
    EXPECT_FLOAT_EQ(*std::max_element(s.channels[0].pixels.begin(), s.channels[0].pixels.end()), 1.0f);
    EXPECT_EQ(s.labels.at(110, 120), 5);
}

TEST(LoadSample, UndeclaredCodeRejected)
{
    const auto dir = scratch_dir("code99");
    const auto e = write_raw_entry(dir, "V0002", 99);
    EXPECT_THROW(load_sample(e, LabelCoding{}), ValidationError);
}

TEST(LoadSample, MissingChannelsRejected)
{
    const auto dir = scratch_dir("missing");
    auto e = write_raw_entry(dir, "V0003");
    for (int c = 2; c < kNumChannels; ++c)
        e.channels[c].clear();
    EXPECT_THROW(load_sample(e, LabelCoding{}), IoError);

    auto f = write_raw_entry(dir, "V0004");
    fs::remove(f.channels[4]);
    try {
        load_sample(f, LabelCoding{});
        FAIL() << "expected IoError";
    } catch (const IoError& err) {
        EXPECT_NE(std::string(err.what()).find("missing file"), std::string::npos);
    }
}

TEST(LoadSample, DimensionMismatchRejected)
{
    const auto dir = scratch_dir("dims");
    auto e = write_raw_entry(dir, "V0005");
    cv::imwrite(e.channels[3].string(), cv::Mat(500, 640, CV_8UC1, cv::Scalar(1)));
    EXPECT_THROW(load_sample(e, LabelCoding{}), ValidationError);
}

TEST(LoadSample, SixteenBitNormalisedBy65535)
{
    const auto dir = scratch_dir("load16");
    cv::Mat m(4, 5, CV_16UC1, cv::Scalar(65535));
    m.at<std::uint16_t>(1, 2) = 32768;
    cv::imwrite((dir / "a.png").string(), m);
    const auto ch = read_intensity(dir / "a.png");
    EXPECT_FLOAT_EQ(ch.at(0, 0), 1.0f);
    EXPECT_FLOAT_EQ(ch.at(1, 2), 32768.0f / 65535.0f);
}

TEST(Manifest, DefaultExclusionsAreTableIds)
{
    const auto& ids = default_exclusions();
    EXPECT_EQ(ids.size(), 14u);
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 14u);
    const auto m = DatasetManifest::from_json(nlohmann::json{{"samples", nlohmann::json::array()}});
    EXPECT_EQ(m.exclusion_list, ids);
}

TEST(Manifest, JsonRoundTripResolvesRelativePaths)
{
    const auto dir = scratch_dir("manifest");
    const auto e = write_raw_entry(dir, "V0010");
    nlohmann::json j = {{"exclude", {"X1"}},
                        {"samples",
                         {{{"id", "V0010"},
                           {"channels",
                            {{"aqua", "V0010_aqua.png"},
                             {"far_red", "V0010_far_red.png"},
                             {"green", "V0010_green.png"},
                             {"red", "V0010_red.png"},
                             {"gold", "V0010_gold.png"},
                             {"dapi", "V0010_dapi.png"}}},
                           {"labels", "V0010_labels.png"}}}}};
    std::ofstream(dir / "m.json") << j.dump();
    const auto m = DatasetManifest::load(dir / "m.json");
    ASSERT_EQ(m.samples.size(), 1u);
    EXPECT_EQ(m.samples[0].channels[5], dir / "V0010_dapi.png");
    EXPECT_EQ(m.exclusion_list, std::vector<std::string>{"X1"});
    const auto s = curate(m, LabelCoding{});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].id, "V0010");

    m.save(dir / "copy.json");
    const auto again = DatasetManifest::load(dir / "copy.json");
    EXPECT_EQ(again.samples[0].labels, m.samples[0].labels);
    EXPECT_THROW(DatasetManifest::load(dir / "nope.json"), IoError);
}

namespace {

DatasetManifest manifest_of(const std::vector<std::string>& ids, const std::vector<std::string>& exclude)
{
    DatasetManifest m;
    m.exclusion_list = exclude;
    for (const auto& id : ids)
        m.samples.push_back(ManifestEntry{id, {}, {}, ProbeSet::vysis});
    return m;
}

} // namespace

TEST(Curate, EightyFourVysisIdsLeaveSeventy)
{
    std::vector<std::string> ids = default_exclusions();
    for (int i = 0; i < 70; ++i)
        ids.push_back("V9" + std::to_string(1000 + i));
    DatasetManifest m = manifest_of(ids, default_exclusions());
    const auto kept = curated_entries(m);
    EXPECT_EQ(kept.size(), 70u);
    for (const auto& e : kept)
        EXPECT_EQ(std::count(default_exclusions().begin(), default_exclusions().end(), e.id), 0);
}

TEST(Curate, EmptyExclusionIsIdentityAndOnlyExcludedIsEmpty)
{
    const std::vector<std::string> ids{"B", "A", "C"};
    const auto all = curated_entries(manifest_of(ids, {}));
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].id, "A");
    EXPECT_EQ(all[2].id, "C");
    EXPECT_TRUE(curated_entries(manifest_of(ids, ids)).empty());
}

TEST(Curate, NonVysisDroppedAndExpectedCountChecked)
{
    auto m = manifest_of({"A", "B"}, {});
    m.samples[1].probe_set = ProbeSet::asi;
    EXPECT_EQ(curated_entries(m).size(), 1u);
    m.expected_count = 65;
    EXPECT_THROW(curate(m, LabelCoding{}), ValidationError);
}

TEST(Curate, PropertyNeverReturnsExcludedIds)
{
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> ids, excl;
        const int n = static_cast<int>(rng.index(30));
        for (int i = 0; i < n; ++i) {
            ids.push_back("V" + std::to_string(rng.index(40)));
            if (rng.bernoulli(0.4))
                excl.push_back(ids.back());
        }
        for (int i = 0; i < 3; ++i)
            excl.push_back("V" + std::to_string(rng.index(40)));
        const auto kept = curated_entries(manifest_of(ids, excl));
        for (const auto& e : kept)
            EXPECT_EQ(std::count(excl.begin(), excl.end(), e.id), 0);
        EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end(), [](auto& a, auto& b) { return a.id < b.id; }));
        std::size_t expected = 0;
        for (const auto& id : ids)
            expected += std::count(excl.begin(), excl.end(), id) == 0;
        EXPECT_EQ(kept.size(), expected);
    }
}

TEST(Preprocess, ReferenceFrameGeometry)
{
    EXPECT_EQ(scaled_extent(536, 0.7), 375);
    EXPECT_EQ(scaled_extent(490, 0.7), 343);
    auto s = small_sample(517, 645);
    const CropWindow crop{40, 10, 536, 490};
    const auto out = preprocess(s, crop, 0.7);
    EXPECT_EQ(out.width(), 375);
    EXPECT_EQ(out.height(), 343);
    EXPECT_THROW(preprocess(s, CropWindow{200, 0, 536, 490}, 0.7), ValidationError);
    EXPECT_THROW(preprocess(s, crop, 0.0), ValidationError);
    EXPECT_THROW(preprocess(s, crop, 1.5), ValidationError);
}

TEST(Preprocess, IdentityAndIdempotence)
{
    const auto s = synth_sample(SynthConfig{}, 0);
    const CropWindow full{0, 0, s.width(), s.height()};
    const auto once = preprocess(s, full, 1.0);
    EXPECT_EQ(once.labels, s.labels);
    for (int c = 0; c < kNumChannels; ++c)
        EXPECT_EQ(once.channels[c], s.channels[c]);
    const auto twice = preprocess(once, full, 1.0);
    EXPECT_EQ(twice.labels, once.labels);
    EXPECT_EQ(twice.channels[2], once.channels[2]);
}

TEST(Preprocess, ConstantStaysConstantAndCodesStayValid)
{
    auto s = small_sample(50, 70);
    for (auto& ch : s.channels)
        std::fill(ch.pixels.begin(), ch.pixels.end(), 0.375f);
    for (int y = 10; y < 30; ++y)
        for (int x = 5; x < 25; ++x)
            s.labels.at(y, x) = 1 + (x + y) % 24;
    const auto out = preprocess(s, CropWindow{3, 4, 61, 41}, 0.63);
    for (const auto& ch : out.channels)
        for (float v : ch.pixels)
            EXPECT_FLOAT_EQ(v, 0.375f);
    EXPECT_NO_THROW(LabelCoding{}.check_labels(out.labels, "out"));
}

TEST(Preprocess, CropWindowCoversForeground)
{
    auto s = small_sample(517, 645);
    s.labels.at(100, 600) = 3;
    s.labels.at(400, 120) = 4;
    const auto w = label_crop_window(s.labels, LabelCoding{}, 536, 490);
    EXPECT_EQ(w.width, 536);
    EXPECT_EQ(w.height, 490);
    EXPECT_TRUE(w.fits(645, 517));
    EXPECT_TRUE(w.x <= 120 && w.x + w.width > 600);
    EXPECT_TRUE(w.y <= 100 && w.y + w.height > 400);

    auto t = small_sample(517, 645, "U");
    t.labels.at(510, 640) = 255;
    std::vector<MfishSample> both{s, t};
    const auto d = dataset_crop_window(both, LabelCoding{}, 536, 490);
    EXPECT_TRUE(d.fits(645, 517));
    EXPECT_EQ(d.x + d.width, 645);
    EXPECT_EQ(d.y + d.height, 517);

    const auto small = label_crop_window(small_sample(20, 30).labels, LabelCoding{}, 536, 490);
    EXPECT_EQ(small, (CropWindow{0, 0, 30, 20}));
}

TEST(Augment, IdentityConfigLeavesSampleUnchanged)
{
    const auto s = synth_sample(SynthConfig{}, 1);
    const auto out = augment(s, AugmentationConfig::identity(), LabelCoding{}, 7);
    EXPECT_EQ(out.labels, s.labels);
    for (int c = 0; c < kNumChannels; ++c)
        EXPECT_EQ(out.channels[c], s.channels[c]);
}

TEST(Augment, QuarterTurnMatchesIndexPermutation)
{
    const int N = 9;
    auto s = small_sample(N, N);
    Rng rng(3);
    for (int c = 0; c < kNumChannels; ++c)
        for (auto& v : s.channels[c].pixels)
            v = static_cast<float>(rng.uniform());
    for (auto& v : s.labels.pixels)
        v = static_cast<int>(rng.index(25));
    AffineParams p;
    p.rotation_deg = 90.0;
    const auto out = apply_affine(s, p, LabelCoding{});
    for (int Y = 0; Y < N; ++Y)
        for (int X = 0; X < N; ++X) {
            EXPECT_EQ(out.labels.at(Y, X), s.labels.at(N - 1 - X, Y));
            for (int c = 0; c < kNumChannels; ++c)
                EXPECT_FLOAT_EQ(out.channels[c].at(Y, X), s.channels[c].at(N - 1 - X, Y));
        }
}

TEST(Augment, DeterministicAndCodePreserving)
{
    AugmentationConfig cfg;
    cfg.seed = 11;
    const auto s = synth_sample(SynthConfig{}, 2);
    const auto a = augment(s, cfg, LabelCoding{}, 3);
    const auto b = augment(s, cfg, LabelCoding{}, 3);
    const auto c = augment(s, cfg, LabelCoding{}, 4);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.channels[0], b.channels[0]);
    EXPECT_NE(a.labels, c.labels);
    const std::set<int> before(s.labels.pixels.begin(), s.labels.pixels.end());
    for (int epoch = 0; epoch < 20; ++epoch) {
        const auto o = augment(s, cfg, LabelCoding{}, epoch);
        for (int v : o.labels.pixels)
            EXPECT_TRUE(before.count(v)) << v;
        for (const auto& ch : o.channels)
            for (float x : ch.pixels)
                EXPECT_TRUE(x >= 0.0f && x <= 1.0f);
    }
}

TEST(Augment, DeltaStaysAlignedWithItsLabel)
{
    AugmentationConfig cfg;
    cfg.seed = 5;
    for (int trial = 0; trial < 25; ++trial) {
        auto s = small_sample(41, 41);
        s.channels[0].at(17, 23) = 1.0f;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                s.labels.at(17 + dy, 23 + dx) = 7; // nearest sampling may skip a lone pixel
        const AffineParams p = draw_affine(cfg, "delta", trial);
        const auto out = apply_affine(s, p, LabelCoding{});
        const auto& ch = out.channels[0].pixels;
        const auto argmax = std::max_element(ch.begin(), ch.end()) - ch.begin();
        if (ch[argmax] <= 0.0f)
            continue; // moved out of frame
        std::vector<std::ptrdiff_t> label_pixels;
        for (std::size_t i = 0; i < out.labels.size(); ++i)
            if (out.labels.pixels[i] == 7)
                label_pixels.push_back(static_cast<std::ptrdiff_t>(i));
        ASSERT_FALSE(label_pixels.empty());
        // The label pixel and the intensity peak are at most one pixel apart on each axis.
        const int ay = static_cast<int>(argmax / 41), ax = static_cast<int>(argmax % 41);
        bool near = false;
        for (auto i : label_pixels)
            near |= std::abs(static_cast<int>(i / 41) - ay) <= 1 && std::abs(static_cast<int>(i % 41) - ax) <= 1;
        EXPECT_TRUE(near) << "trial " << trial;
    }
}

TEST(Augment, ConfigValidation)
{
    AugmentationConfig cfg;
    cfg.scale = {0.0, 1.0};
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg.scale = {1.0, 1.0};
    cfg.rotation_deg = {0.0, std::numeric_limits<double>::infinity()};
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Batch, SixtyFiveSamplesGiveFourFullAndOneShort)
{
    SynthConfig cfg;
    cfg.height = cfg.width = 24;
    cfg.rows = 4;
    cfg.cols = 6;
    cfg.jitter = 0;
    const auto samples = synth_dataset(cfg, 65);
    LabelCoding coding;
    BatchStream<float> stream(samples, coding, 16, 9);
    EXPECT_EQ(stream.batch_sizes(), (std::vector<int>{16, 16, 16, 16, 1}));
    std::vector<int> seen;
    std::set<std::string> ids;
    stream.for_each_batch(0, [&](const Batch<float>& b) {
        seen.push_back(b.size());
        ids.insert(b.ids.begin(), b.ids.end());
    });
    EXPECT_EQ(seen, (std::vector<int>{16, 16, 16, 16, 1}));
    EXPECT_EQ(ids.size(), 65u);
    EXPECT_EQ(stream.order(3), stream.order(3));
    EXPECT_NE(stream.order(3), stream.order(4));
}

TEST(Batch, OneHotAndMaskAgree)
{
    LabelCoding coding;
    auto s = small_sample(4, 6);
    s.labels.at(0, 0) = coding.background_code();
    s.labels.at(0, 1) = coding.overlap_code();
    s.labels.at(1, 1) = 5;
    s.labels.at(2, 3) = 24;
    std::vector<MfishSample> v{s};
    const auto b = make_batch<double>(v, coding);
    EXPECT_EQ(b.targets.c(), 24);
    EXPECT_EQ(b.mask(0, 0, 0, 0), 0.0);
    EXPECT_EQ(b.mask(0, 0, 0, 1), 0.0);
    EXPECT_EQ(b.mask(0, 0, 1, 1), 1.0);
    for (int k = 0; k < 24; ++k) {
        EXPECT_EQ(b.targets(0, k, 0, 0), 0.0);
        EXPECT_EQ(b.targets(0, k, 1, 1), k == coding.class_index(5) ? 1.0 : 0.0);
        EXPECT_EQ(b.targets(0, k, 2, 3), k == 23 ? 1.0 : 0.0);
    }
    // Property: one-hot channel sum equals the mask everywhere.
    const auto synth = synth_dataset(SynthConfig{}, 3);
    const auto sb = make_batch<float>(synth, coding);
    for (int n = 0; n < sb.size(); ++n)
        for (int y = 0; y < sb.inputs.h(); ++y)
            for (int x = 0; x < sb.inputs.w(); ++x) {
                float sum = 0;
                for (int k = 0; k < 24; ++k)
                    sum += sb.targets(n, k, y, x);
                ASSERT_EQ(sum, sb.mask(n, 0, y, x));
            }
}

TEST(Batch, HeterogeneousSizesRejected)
{
    std::vector<MfishSample> v{small_sample(4, 4, "a"), small_sample(5, 4, "b")};
    LabelCoding coding;
    EXPECT_THROW(BatchStream<float>(v, coding, 2, 0), ValidationError);
    EXPECT_THROW(make_batch<float>(v, coding), ValidationError);
}

TEST(Batch, WorkerCountDoesNotChangeBatches)
{
    const auto samples = synth_dataset(SynthConfig{}, 5);
    LabelCoding coding;
    AugmentationConfig aug;
    aug.seed = 2;
    auto transform = [&](const MfishSample& s, std::uint64_t epoch) { return augment(s, aug, coding, epoch); };
    std::vector<std::vector<float>> one, three;
    BatchStream<float>(samples, coding, 2, 1, transform, 1).for_each_batch(1, [&](const Batch<float>& b) {
        one.emplace_back(b.inputs.data(), b.inputs.data() + b.inputs.size());
    });
    BatchStream<float>(samples, coding, 2, 1, transform, 3).for_each_batch(1, [&](const Batch<float>& b) {
        three.emplace_back(b.inputs.data(), b.inputs.data() + b.inputs.size());
    });
    EXPECT_EQ(one, three);
}

TEST(Synth, DeterministicValidAndWritable)
{
    SynthConfig cfg;
    const auto a = synth_sample(cfg, 4);
    const auto b = synth_sample(cfg, 4);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.channels[5], b.channels[5]);
    EXPECT_NO_THROW(a.validate(LabelCoding{}));
    std::set<int> codes(a.labels.pixels.begin(), a.labels.pixels.end());
    EXPECT_EQ(codes.size(), 26u); // 24 chromosomes, background, overlap

    std::set<std::array<bool, 5>> sigs;
    for (int k = 0; k < 24; ++k)
        sigs.insert(class_signature(k));
    EXPECT_EQ(sigs.size(), 24u);

    const auto dir = scratch_dir("synth");
    const auto path = write_dataset(synth_dataset(cfg, 2), dir);
    const auto loaded = curate(DatasetManifest::load(path), LabelCoding{});
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[1].labels, synth_sample(cfg, 1).labels);
    EXPECT_NEAR(loaded[1].channels[3].at(10, 10), synth_sample(cfg, 1).channels[3].at(10, 10), 1.0 / 65535);
}
