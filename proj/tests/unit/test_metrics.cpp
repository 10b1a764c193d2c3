#include "genmm/metrics.hpp"
#include "synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace genmm;

namespace {

MotionFeatures random_features(int H, FeatureLayout layout, unsigned seed, double offset = 0.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    MotionFeatures f;
    f.layout = layout;
    f.data.resize(H, layout.width());
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < layout.width(); ++j) f.data(i, j) = u(rng) + offset;
    return f;
}

}  // namespace

TEST(Metrics, CoverageExamples) {
    const auto ex = fixtures::make_clip(80, 1, false).features;
    EXPECT_EQ(coverage({ex}, ex, 11), 100.0);

    MotionFeatures still = ex;
    for (int t = 0; t < still.frames(); ++t) still.data.row(t) = ex.data.row(0);
    EXPECT_LT(coverage({ex}, still, 11, 1e-3), 5.0);

    // example = A followed by a far-away B; only windows wholly inside A are covered
    const FeatureLayout layout{1, 0};
    const auto A = random_features(40, layout, 2);
    const auto B = random_features(40, layout, 3, 100.0);
    MotionFeatures AB;
    AB.layout = layout;
    AB.data.resize(80, layout.width());
    AB.data << A.data, B.data;
    const double expected = 100.0 * (40 - 11 + 1) / (80 - 11 + 1);
    EXPECT_DOUBLE_EQ(coverage({AB}, A, 11), expected);
}

TEST(Metrics, SetDiversity) {
    const auto ex = fixtures::make_clip(50, 4, false).features;
    EXPECT_EQ(set_diversity({ex, ex, ex}, ex), 0.0);

    const double c = 0.3;
    MotionFeatures plus = ex, minus = ex;
    plus.data.col(2).array() += c;
    minus.data.col(2).array() -= c;
    const int R = ex.layout.rotation_width();
    double mean = 0, n = 0;
    for (int t = 0; t < ex.frames(); ++t)
        for (int k = 0; k < R; ++k, ++n) mean += ex.data(t, k);
    mean /= n;
    double var = 0;
    for (int t = 0; t < ex.frames(); ++t)
        for (int k = 0; k < R; ++k) var += (ex.data(t, k) - mean) * (ex.data(t, k) - mean);
    const double sd = std::sqrt(var / n);
    // a two-point set {x - c, x + c} has population std c, on 1 of R channels
    EXPECT_NEAR(set_diversity({plus, minus}, ex), c / R / sd, 1e-12);
    EXPECT_THROW(set_diversity({ex}, ex), ConfigError);
}

TEST(Metrics, PatchDistance) {
    const auto ex = fixtures::make_clip(60, 5, false).features;
    EXPECT_EQ(patch_distance({ex}, ex, 11), 0.0);
    MotionFeatures shifted = ex;
    const double delta = 0.02;
    shifted.data.array() += delta;
    // a constant offset is small next to the clip's own variation, so each
    // window's nearest neighbour is its own source window
    EXPECT_NEAR(patch_distance({ex}, shifted, 11), delta, 1e-9);
    EXPECT_NEAR(patch_distance({ex}, shifted, 23), delta, 1e-9);
}

TEST(Metrics, LinearFit) {
    EXPECT_NEAR(linear_fit_r2({1, 2, 3, 4}, {3, 5, 7, 9}), 1.0, 1e-12);
    // r^2 by hand for x = {0,1,2,3}, y = {0,1,2,2}: mx = 1.5, my = 1.25
    const double sxy = (-1.5 * -1.25) + (-0.5 * -0.25) + (0.5 * 0.75) + (1.5 * 0.75);
    const double sxx = 5.0;
    const double syy = 1.5625 + 0.0625 + 0.5625 + 0.5625;
    EXPECT_NEAR(linear_fit_r2({0, 1, 2, 3}, {0, 1, 2, 2}), sxy * sxy / (sxx * syy), 1e-12);
    EXPECT_THROW(linear_fit_r2({1}, {1}), ConfigError);
}

TEST(Metrics, ProbeAndReport) {
    const auto ex = fixtures::make_clip(60, 6, false);
    SynthesisConfig cfg;
    const auto samples = scaling_probe({ex.features}, ex.skeleton, cfg, {100});
    ASSERT_EQ(samples.size(), 1u);
    EXPECT_EQ(samples[0].frames, 100);
    EXPECT_GT(samples[0].seconds, 0.0);
    EXPECT_GT(samples[0].peak_memory, 0u);
    const std::string csv = probe_csv(samples);
    EXPECT_EQ(csv.rfind("frames,wall_time_s,peak_memory_bytes\n100,", 0), 0u);

    MetricReport r;
    r.coverage = 99.5;
    const std::string text = r.to_text();
    for (const char* key : {"coverage: 99.5", "set_diversity: n/a", "global_patch_distance:", "local_patch_distance:",
                            "wall_time:", "peak_memory:"})
        EXPECT_NE(text.find(key), std::string::npos) << key;
}
