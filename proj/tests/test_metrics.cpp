#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cfpnet/metrics.hpp"
#include "support/oracles.hpp"

using namespace cfpnet;
using cfpnet::testing::brute_otsu;
using cfpnet::testing::set_jaccard;

namespace {

BinaryMask random_mask(int w, int h, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  BinaryMask m(w, h);
  for (auto& v : m.pixels) v = b(rng) ? 1 : 0;
  return m;
}

GrayImage random_gray(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage g(w, h);
  for (auto& v : g.pixels) v = u(rng);
  return g;
}

}  // namespace

TEST(Jaccard, Examples) {
  BinaryMask a(4, 1, {1, 1, 0, 0}), b(4, 1, {0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(jaccard(a, b), 1.0 / 3.0);
  EXPECT_EQ(jaccard(a, a), 1.0);
  BinaryMask c(4, 1, {0, 0, 1, 1});
  EXPECT_EQ(jaccard(a, c), 0.0);
  EXPECT_EQ(jaccard(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
  EXPECT_THROW(jaccard(a, BinaryMask(2, 2)), ArgumentError);
  EXPECT_THROW(BinaryMask(2, 1, {0, 2}), ArgumentError);
}

TEST(Jaccard, MatchesSetOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_mask(9, 7, 0.4, rng), b = random_mask(9, 7, 0.3, rng);
    EXPECT_EQ(jaccard(a, b), set_jaccard(a, b));
    EXPECT_EQ(jaccard(a, b), jaccard(b, a));
  }
}

TEST(Tanimoto, Examples) {
  EXPECT_DOUBLE_EQ(tanimoto(GrayImage(1, 1, {1.0}), GrayImage(1, 1, {0.5})), 2.0 / 3.0);
  const GrayImage z(3, 2, 0.0);
  EXPECT_EQ(tanimoto(z, z), 1.0);
  const GrayImage a(2, 2, {1, 0, 1, 1});
  EXPECT_EQ(tanimoto(a, a), 1.0);
  EXPECT_THROW(tanimoto(a, GrayImage(2, 2, {1.5, 0, 0, 0})), ArgumentError);
  EXPECT_THROW(tanimoto(a, GrayImage(2, 2, {-0.1, 0, 0, 0})), ArgumentError);
  EXPECT_THROW(tanimoto(a, GrayImage(2, 2, {std::nan(""), 0, 0, 0})), ArgumentError);
  EXPECT_THROW(tanimoto(a, GrayImage(1, 4, 0.0)), ArgumentError);
}

TEST(Tanimoto, EqualsJaccardOnBinary) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_mask(8, 8, 0.5, rng), b = random_mask(8, 8, 0.5, rng);
    EXPECT_NEAR(tanimoto(a.to_gray(), b.to_gray()), jaccard(a, b), 1e-12);
  }
}

TEST(Tanimoto, BoundedAndSymmetric) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_gray(6, 5, rng), b = random_gray(6, 5, rng);
    const double t = tanimoto(a, b);
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    EXPECT_EQ(t, tanimoto(b, a));
    EXPECT_NEAR(tanimoto(a, a), 1.0, 1e-15);
  }
}

TEST(Mae, Examples) {
  const GrayImage one(4, 3, 1.0), zero(4, 3, 0.0);
  EXPECT_EQ(mae(one, one), 0.0);
  EXPECT_DOUBLE_EQ(mae(one, zero), 255.0 / 256.0);
  EXPECT_THROW(mae(one, GrayImage(3, 4, 0.0)), ArgumentError);
}

TEST(Mae, MatchesNaiveLoop) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_gray(7, 5, rng), b = random_gray(7, 5, rng);
    double s = 0;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x) s += std::abs(a(x, y) * 255.0 - b(x, y) * 255.0);
    EXPECT_NEAR(mae(a, b), s / (7.0 * 5.0 * 256.0), 1e-12);
    EXPECT_EQ(mae(a, b), mae(b, a));
  }
}

TEST(Otsu, Examples) {
  const GrayImage bimodal(6, 1, {0, 0, 0, 1, 1, 1});
  EXPECT_EQ(otsu_threshold(bimodal).pixels, (std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1}));
  const GrayImage flat(5, 5, 0.37);
  EXPECT_EQ(otsu_threshold(flat).count(), 0u);
  EXPECT_THROW(otsu_threshold(GrayImage()), ArgumentError);
}

TEST(Otsu, TwoGaussianMixture) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> lo(0.3, 0.05), hi(0.7, 0.05);
  GrayImage g(64, 64);
  for (std::size_t i = 0; i < g.size(); ++i) g.pixels[i] = std::clamp(i % 3 ? lo(rng) : hi(rng), 0.0, 1.0);
  const Histogram h = histogram(g);
  const int t = otsu_level(h);
  EXPECT_EQ(t, brute_otsu(h));
  EXPECT_GT(t, 255 * 0.4);
  EXPECT_LT(t, 255 * 0.6);
}

TEST(Otsu, MatchesExhaustiveOracleOnRandomHistograms) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 200; ++k) {
    Histogram h{};
    const int occupied = 2 + static_cast<int>(rng() % 40);
    for (int j = 0; j < occupied; ++j) h[rng() % 256] += 1 + rng() % 500;
    const int t = otsu_level(h), o = brute_otsu(h);
    if (t != o) {
      EXPECT_NEAR(between_class_variance(h, t), between_class_variance(h, o),
                  1e-9 * between_class_variance(h, o)) << "k=" << k;
    }
  }
}

TEST(Stability, NoPerturbationIsPerfect) {
  StabilitySpec s;
  s.scales = {2};
  s.ratios = {0.3};
  s.perturbation = {1.0, 0.0};
  for (const auto& r : stability_experiment(s)) EXPECT_DOUBLE_EQ(r.value, 1.0) << r.metric;
}

TEST(Stability, TanimotoVariesLessThanMaeOverRatios) {
  StabilitySpec s;
  s.scales = {4};
  const auto rows = stability_experiment(s);
  auto all = [](const StabilityRow&) { return true; };
  EXPECT_LT(metric_spread(rows, "tanimoto", all), metric_spread(rows, "one_minus_mae", all));
}

TEST(Stability, TanimotoConstantOverScale) {
  StabilitySpec s;
  s.scales = {1, 2, 4, 8, 10};
  s.ratios = {0.2};
  const auto rows = stability_experiment(s);
  EXPECT_LT(metric_spread(rows, "tanimoto", [](const StabilityRow&) { return true; }), 1e-3);
}

TEST(Stability, RatiosAreHonoured) {
  StabilitySpec s;
  for (const auto& r : stability_experiment(s)) EXPECT_NEAR(r.actual_ratio, r.target_ratio, 0.02);
}

TEST(Stability, EmptySweepThrows) {
  StabilitySpec s;
  s.ratios.clear();
  EXPECT_THROW(stability_experiment(s), ArgumentError);
  StabilitySpec t;
  t.scales.clear();
  EXPECT_THROW(stability_experiment(t), ArgumentError);
}
