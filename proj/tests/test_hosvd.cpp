#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "mfish/data/synth.hpp"
#include "mfish/hosvd/classifier.hpp"

using namespace mfish;
using namespace mfish::hosvd;

namespace {

DenseTensor random_dense(std::vector<int> dims, Rng& rng)
{
    DenseTensor t(std::move(dims));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = rng.uniform(-1, 1);
    return t;
}

// Oracle for 3-mode tensors: explicit unfolding, full SVD per mode, and the
// projection X x_n (U_n U_n^T) evaluated by nested loops.
double oracle_truncation_error(const DenseTensor& x, const std::vector<int>& ranks)
{
    const int I = x.dim(0), J = x.dim(1), K = x.dim(2);
    std::vector<Matrix> proj;
    for (int mode = 0; mode < 3; ++mode) {
        const int d = x.dim(mode);
        Matrix unf(d, static_cast<Eigen::Index>(x.size() / d));
        for (int i = 0; i < I; ++i)
            for (int j = 0; j < J; ++j)
                for (int k = 0; k < K; ++k) {
                    const int idx[3] = {i, j, k};
                    int col = 0;
                    for (int m = 2; m >= 0; --m) // any fixed column order works
                        if (m != mode)
                            col = col * x.dim(m) + idx[m];
                    unf(idx[mode], col) = x.at({i, j, k});
                }
        Eigen::JacobiSVD<Matrix> svd(unf, Eigen::ComputeFullU);
        const Matrix u = svd.matrixU().leftCols(ranks[mode]);
        proj.push_back(u * u.transpose());
    }
    double err = 0, norm = 0;
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j)
            for (int k = 0; k < K; ++k) {
                double v = 0;
                for (int a = 0; a < I; ++a)
                    for (int b = 0; b < J; ++b)
                        for (int c = 0; c < K; ++c)
                            v += proj[0](i, a) * proj[1](j, b) * proj[2](k, c) * x.at({a, b, c});
                const double e = x.at({i, j, k}) - v;
                err += e * e;
                norm += x.at({i, j, k}) * x.at({i, j, k});
            }
    return std::sqrt(err / norm);
}

double gram_deviation(const Matrix& u)
{
    return (u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

data::MfishSample blank_sample(int h, int w, const std::string& id = "S")
{
    data::MfishSample s;
    s.id = id;
    s.labels = data::LabelMap(h, w, 0);
    for (auto& c : s.channels)
        c = data::Channel(h, w, 0.0f);
    return s;
}

} // namespace

TEST(Hosvd, RankOneTensorIsExact)
{
    Rng rng(1);
    DenseTensor x({4, 5, 3});
    Eigen::VectorXd a = Eigen::VectorXd::Random(4), b = Eigen::VectorXd::Random(5), c = Eigen::VectorXd::Random(3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j)
            for (int k = 0; k < 3; ++k)
                x.at({i, j, k}) = a(i) * b(j) * c(k);
    const auto d = hosvd_decompose(x, {1, 1, 1});
    EXPECT_LT(d.relative_error, 1e-10);
    EXPECT_EQ(d.core.dims(), (std::vector<int>{1, 1, 1}));
}

TEST(Hosvd, FullRankReconstructionIsExact)
{
    Rng rng(2);
    for (const auto& dims : {std::vector<int>{3, 3, 3}, std::vector<int>{4, 2, 5, 3}}) {
        const auto x = random_dense(dims, rng);
        const auto d = hosvd_decompose(x, dims);
        EXPECT_LT(d.relative_error, 1e-10);
        const auto back = reconstruct(d.core, d.factors);
        double worst = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, std::abs(back[i] - x[i]));
        EXPECT_LT(worst, 1e-10);
        for (const auto& u : d.factors)
            EXPECT_LT(gram_deviation(u), 1e-10);
    }
}

TEST(Hosvd, TruncationMatchesModeSvdOracle)
{
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_dense({4, 4, 4}, rng);
        const auto d = hosvd_decompose(x, {2, 2, 2});
        EXPECT_NEAR(d.relative_error, oracle_truncation_error(x, {2, 2, 2}), 1e-8);
        for (const auto& u : d.factors)
            EXPECT_LT(gram_deviation(u), 1e-10);
    }
    const auto y = random_dense({5, 3, 4}, rng);
    EXPECT_NEAR(hosvd_decompose(y, {3, 2, 2}).relative_error, oracle_truncation_error(y, {3, 2, 2}), 1e-8);
}

TEST(Hosvd, ErrorNonIncreasingInEveryRank)
{
    Rng rng(4);
    for (int trial = 0; trial < 4; ++trial) {
        const auto x = random_dense({5, 4, 6}, rng);
        for (int mode = 0; mode < 3; ++mode) {
            std::vector<int> r{2, 2, 2};
            double prev = hosvd_decompose(x, r).relative_error;
            for (r[mode] = 3; r[mode] <= x.dim(mode); ++r[mode]) {
                const double e = hosvd_decompose(x, r).relative_error;
                EXPECT_LE(e, prev + 1e-12);
                prev = e;
            }
        }
    }
}

TEST(Hosvd, RankBeyondExtentRejected)
{
    Rng rng(5);
    const auto x = random_dense({3, 3, 3}, rng);
    EXPECT_THROW(hosvd_decompose(x, {4, 1, 1}), ValidationError);
    EXPECT_THROW(hosvd_decompose(x, {1, 1}), ValidationError);
}

TEST(Patches, DistinctCentresOfTheRightClass)
{
    data::LabelCoding coding;
    auto s = blank_sample(30, 30);
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x)
            s.labels.at(y, x) = 7; // 100 pixels
    for (int x = 20; x < 30; ++x)
        s.labels.at(25, x) = 9; // 10 pixels
    Rng rng(6);
    const auto sets = sample_patches(s, coding, 30, 5, rng);
    ASSERT_EQ(sets.size(), 2u);
    EXPECT_EQ(sets[0].class_code, 7);
    EXPECT_EQ(sets[0].patches.size(), 30u);
    std::set<std::pair<int, int>> distinct(sets[0].centers.begin(), sets[0].centers.end());
    EXPECT_EQ(distinct.size(), 30u);
    for (auto [y, x] : sets[0].centers)
        EXPECT_EQ(s.labels.at(y, x), 7);
    EXPECT_EQ(sets[1].class_code, 9);
    EXPECT_EQ(sets[1].patches.size(), 10u);

    Rng again(6);
    EXPECT_EQ(sample_patches(s, coding, 30, 5, again)[0].centers, sets[0].centers);
    EXPECT_THROW(sample_patches(blank_sample(5, 5), coding, 30, 5, again), ValidationError);
}

TEST(Patches, ZeroPaddedAtBorders)
{
    auto s = blank_sample(4, 4);
    for (auto& c : s.channels)
        std::fill(c.pixels.begin(), c.pixels.end(), 1.0f);
    const auto p = extract_patch(s, 0, 0, 3);
    // Row -1 and column -1 fall outside the image.
    for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx)
            EXPECT_EQ(p[(dy * 3 + dx) * 6], (dy > 0 && dx > 0) ? 1.0 : 0.0);
}

TEST(ClassModels, SingleClassAndDuplicatePatches)
{
    Rng rng(7);
    PatchSet set{3, 3, {}, {}};
    for (int i = 0; i < 6; ++i) {
        std::vector<double> p(54);
        for (auto& v : p)
            v = rng.uniform();
        set.patches.push_back(p);
    }
    const std::array<int, 4> ranks{30, 3, 3, 6};
    const auto m = fit_class_models({set}, ranks);
    ASSERT_EQ(m.classes.size(), 1u);
    EXPECT_LT(gram_deviation(m.classes[0].basis), 1e-10);

    PatchSet doubled = set;
    doubled.patches.insert(doubled.patches.end(), set.patches.begin(), set.patches.end());
    const auto m2 = fit_class_models({doubled}, ranks);
    const Matrix p1 = m.classes[0].basis * m.classes[0].basis.transpose();
    const Matrix p2 = m2.classes[0].basis * m2.classes[0].basis.transpose();
    EXPECT_LT((p1 - p2).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_THROW(fit_class_models({}, ranks), ValidationError);
}

TEST(Classify, TrainingPatchRecoversItsClass)
{
    data::LabelCoding coding;
    data::SynthConfig cfg;
    cfg.noise_sd = 0.0;
    cfg.exposure_offset = 0.0;
    const auto s = data::synth_sample(cfg, 0, coding);
    Rng rng(8);
    const auto sets = sample_patches(s, coding, 30, 7, rng);
    const auto model = fit_class_models(sets, {30, 5, 5, 4});
    const auto pred = classify_pixels(model, s, coding);
    for (const auto& set : sets)
        for (auto [y, x] : set.centers)
            EXPECT_EQ(pred.at(y, x), set.class_code);
    EXPECT_GE(metrics::compute_ccr(pred, s.labels, coding).ccr, 0.99);
}

TEST(Classify, ZeroSampleWithSingleClassModel)
{
    data::LabelCoding coding;
    auto s = blank_sample(6, 6);
    for (int y = 1; y < 5; ++y)
        for (int x = 1; x < 5; ++x)
            s.labels.at(y, x) = 12;
    Rng rng(9);
    const auto model = fit_class_models(sample_patches(s, coding, 5, 3, rng), {30, 5, 5, 4});
    const auto pred = classify_pixels(model, s, coding);
    for (std::size_t i = 0; i < s.labels.size(); ++i)
        EXPECT_EQ(pred.pixels[i], s.labels.pixels[i] == 12 ? 12 : 0);
}

TEST(Classify, InvariantToGlobalIntensityScale)
{
    data::LabelCoding coding;
    data::SynthConfig cfg;
    cfg.noise_sd = 0.03;
    const auto s = data::synth_sample(cfg, 1, coding);
    auto scaled = s;
    for (auto& c : scaled.channels)
        for (auto& v : c.pixels)
            v *= 0.5f; // exact in binary floating point
    Rng r1(10), r2(10);
    const auto model = fit_class_models(sample_patches(s, coding, 20, 5, r1), {20, 5, 5, 4});
    const auto model_scaled = fit_class_models(sample_patches(scaled, coding, 20, 5, r2), {20, 5, 5, 4});
    EXPECT_EQ(classify_pixels(model, s, coding), classify_pixels(model_scaled, scaled, coding));
}

TEST(CrossImage, IdenticalSamplesGiveEqualEntries)
{
    data::LabelCoding coding;
    const auto s = data::synth_sample(data::SynthConfig{}, 2, coding);
    const std::vector<data::MfishSample> two{s, s};
    HosvdParams params;
    params.patch_size = 7;
    const auto m = cross_image_matrix(two, coding, params, 11);
    EXPECT_EQ(m.size(), 2u);
    EXPECT_EQ(m.at(0, 0), m.at(1, 1));
    EXPECT_EQ(m.at(0, 1), m.at(1, 0));
    EXPECT_EQ(m.at(0, 0), m.at(0, 1));
    EXPECT_THROW(cross_image_matrix(std::vector<data::MfishSample>{s}, coding, params, 1), ValidationError);
}
