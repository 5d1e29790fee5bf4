#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "mfish/core/random.hpp"
#include "mfish/metrics/ccr.hpp"
#include "mfish/metrics/error_matrix.hpp"

using namespace mfish;
using namespace mfish::metrics;
using data::LabelCoding;
using data::LabelMap;

namespace {

LabelMap random_labels(Rng& rng, int h, int w, double p_chromosome = 0.8)
{
    LabelCoding coding;
    LabelMap m(h, w);
    for (auto& v : m.pixels) {
        if (rng.bernoulli(p_chromosome))
            v = coding.code_of(static_cast<int>(rng.index(24)));
        else
            v = rng.bernoulli(0.5) ? coding.background_code() : coding.overlap_code();
    }
    return m;
}

} // namespace

TEST(Ccr, IdentityIsOne)
{
    Rng rng(1);
    const auto t = random_labels(rng, 20, 30);
    EXPECT_DOUBLE_EQ(compute_ccr(t, t, LabelCoding{}).ccr, 1.0);
}

TEST(Ccr, FourChromosomePixelsThreeCorrect)
{
    LabelMap truth(1, 6), pred(1, 6);
    truth.pixels = {3, 3, 7, 7, 0, 255};
    pred.pixels = {3, 3, 7, 9, 12, 1};
    const auto r = compute_ccr(pred, truth, LabelCoding{});
    EXPECT_EQ(r.total, 4u);
    EXPECT_EQ(r.correct, 3u);
    EXPECT_DOUBLE_EQ(r.ccr, 0.75);
}

TEST(Ccr, RandomPredictionNearChance)
{
    LabelCoding coding;
    Rng rng(2);
    LabelMap truth(200, 200), pred(200, 200);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth.pixels[i] = coding.code_of(static_cast<int>(i % 24));
        pred.pixels[i] = coding.code_of(static_cast<int>(rng.index(24)));
    }
    const double p = 1.0 / 24.0, n = static_cast<double>(truth.size());
    const double sigma = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(compute_ccr(pred, truth, coding).ccr, p, 3 * sigma);
}

TEST(Ccr, Errors)
{
    LabelMap a(2, 2, 0), b(2, 3, 0);
    EXPECT_THROW(compute_ccr(a, b, LabelCoding{}), ValidationError);
    EXPECT_THROW(compute_ccr(a, a, LabelCoding{}), ValidationError); // no chromosome pixels
}

TEST(Ccr, PropertiesOnRandomMaps)
{
    LabelCoding coding;
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto truth = random_labels(rng, 9, 11);
        auto pred = random_labels(rng, 9, 11, 0.9);
        const auto r = compute_ccr(pred, truth, coding);
        EXPECT_GE(r.ccr, 0.0);
        EXPECT_LE(r.ccr, 1.0);
        const auto m = confusion(pred, truth, coding);
        EXPECT_EQ(static_cast<double>(m.trace()) / static_cast<double>(m.sum()), r.ccr);
        std::uint64_t totals = 0;
        for (int k = 0; k < 24; ++k) {
            EXPECT_EQ(m.row_sum(k), r.per_class[k].total);
            totals += r.per_class[k].total;
        }
        EXPECT_EQ(totals, r.total);
        // Relabelling predictions at background/overlap truth pixels changes nothing.
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (!coding.is_chromosome(truth.pixels[i]))
                pred.pixels[i] = coding.code_of(static_cast<int>(rng.index(24)));
        EXPECT_EQ(compute_ccr(pred, truth, coding).ccr, r.ccr);
    }
}

TEST(Confusion, PerfectIsDiagonalAndSingleClassIsOneRow)
{
    LabelCoding coding;
    Rng rng(4);
    const auto t = random_labels(rng, 10, 10);
    const auto m = confusion(t, t, coding);
    for (int a = 0; a < 24; ++a)
        for (int b = 0; b <= 24; ++b)
            if (a != b)
                EXPECT_EQ(m.at(a, b), 0u);

    LabelMap single(3, 3, 5), pred(3, 3);
    for (std::size_t i = 0; i < pred.size(); ++i)
        pred.pixels[i] = 1 + static_cast<int>(i);
    const auto s = confusion(pred, single, coding);
    for (int a = 0; a < 24; ++a)
        EXPECT_EQ(s.row_sum(a), a == coding.class_index(5) ? 9u : 0u);
}

TEST(Confusion, MergeGivesPooledCcr)
{
    LabelCoding coding;
    LabelMap t1(1, 4), p1(1, 4), t2(1, 2), p2(1, 2);
    t1.pixels = {1, 1, 1, 1};
    p1.pixels = {1, 1, 1, 1};
    t2.pixels = {2, 2};
    p2.pixels = {3, 3};
    auto m = confusion(p1, t1, coding);
    m.merge(confusion(p2, t2, coding));
    EXPECT_DOUBLE_EQ(m.report().ccr, 4.0 / 6.0); // pooled, not (1 + 0) / 2
}

TEST(AverageLastK, Examples)
{
    const std::vector<double> v{0.8, 0.9, 1.0};
    EXPECT_NEAR(average_last_k(v, 3), 0.9, 1e-15);
    EXPECT_EQ(average_last_k(v, 1), 1.0);
    const std::vector<double> c(7, 0.625);
    EXPECT_EQ(average_last_k(c, 5), 0.625);
    EXPECT_THROW(average_last_k(v, 4), ValidationError);
    EXPECT_THROW(average_last_k(v, 0), ValidationError);
}

TEST(ErrorMatrix, StatisticsOnHandMatrix)
{
    ErrorMatrix m({"a", "b", "c"});
    const double vals[3][3] = {{0.9, 0.5, 0.6}, {0.4, 0.8, 0.7}, {0.3, 0.2, 0.6}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            m.at(i, j) = vals[i][j];
    EXPECT_NEAR(m.diagonal_mean(), (0.9 + 0.8 + 0.6) / 3, 1e-15);
    EXPECT_NEAR(m.off_diagonal_mean(), (0.5 + 0.6 + 0.4 + 0.7 + 0.3 + 0.2) / 6, 1e-15);
    // Column bests off the diagonal: a <- 0.4, b <- 0.5, c <- 0.7.
    EXPECT_NEAR(m.best_cross_mean(), (0.4 + 0.5 + 0.7) / 3, 1e-15);
    EXPECT_NEAR(m.diagonal_max_rate_by_test(), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.diagonal_max_rate_by_train(), 1.0, 1e-15); // every row peaks on its diagonal
}

TEST(ErrorMatrix, CsvRoundTripIsExact)
{
    Rng rng(5);
    ErrorMatrix m({"V1", "V2", "V3", "V4"});
    for (auto& v : m.values)
        v = rng.uniform();
    const auto back = ErrorMatrix::from_csv(m.to_csv());
    EXPECT_EQ(back.ids, m.ids);
    EXPECT_EQ(back.values, m.values);

    const auto path = std::filesystem::temp_directory_path() / "mfish_error_matrix.csv";
    m.save_csv(path);
    EXPECT_EQ(ErrorMatrix::load_csv(path).values, m.values);
    EXPECT_THROW(ErrorMatrix::from_csv("train\\test,a,b\na,1\n"), IoError);
}
