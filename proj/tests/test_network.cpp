#include <gtest/gtest.h>

#include <random>

#include "cfpnet/network.hpp"
#include "cfpnet/receptive_field.hpp"

using namespace cfpnet;

namespace {

Tensor<float> random_image(int h, int w, std::uint64_t seed, int n = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor<float> t(Shape{n, 3, h, w});
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST(Counting, SingleConvolution) {
  ParamLayout l;
  LayoutBuilder b(l);
  b.conv("c", 3, 32, 3);
  EXPECT_EQ(l.trainable_count(), 896u);
}

TEST(Counting, ConvolutionMacs) {
  ParamLayout l;
  LayoutBuilder b(l);
  const ConvLayer pw = b.conv("pw", 64, 64, 1);
  const ConvLayer c3 = b.conv("c3", 3, 32, 3);
  TraceContext t;
  t.conv(pw, t.input(64, 1, 1));
  t.conv(c3, t.input(3, 4, 4));
  EXPECT_EQ(t.layers()[0].macs, 4096u);
  EXPECT_EQ(t.layers()[1].macs, 13824u);
}

TEST(Counting, CfpNetMWithinBudget) {
  const std::size_t p = count_parameters(make_cfpnet_m());
  EXPECT_NEAR(static_cast<double>(p), 654279.0, 0.05 * 654279.0);
  EXPECT_EQ(p, 685505u);  // default configuration, frozen
}

TEST(Counting, UNetBaselines) {
  const std::size_t p64 = count_parameters(make_unet(64));
  const std::size_t p32 = count_parameters(make_unet(32));
  EXPECT_NEAR(static_cast<double>(p64), 31031685.0, 0.02 * 31031685.0);
  EXPECT_NEAR(static_cast<double>(p32), 7750821.0, 0.02 * 7750821.0);
  EXPECT_EQ(p64, 31031745u);
  EXPECT_EQ(p32, 7760097u);
}

TEST(Counting, UNetRejectsNonPowerOfTwo) { EXPECT_THROW(make_unet(48), ConfigError); }

TEST(Counting, TraceAgreesWithLayout) {
  const auto a = make_cfpnet_m();
  EXPECT_EQ(trace(a, 128, 256).total_params(), count_parameters(a));
  const auto u = make_unet(32);
  EXPECT_EQ(trace(u, 128, 256).total_params(), count_parameters(u));
}

TEST(Counting, DilationScheduleAddsNoParameters) {
  NetworkConfig c;
  const std::size_t base = count_parameters(make_cfpnet_m(c));
  c.stage2_dilations.assign(c.stage2_dilations.size(), 1);
  c.stage3_dilations.assign(c.stage3_dilations.size(), 1);
  EXPECT_EQ(count_parameters(make_cfpnet_m(c)), base);
}

TEST(Counting, SweepCoversAllSwitches) {
  const auto sweep = parameter_sweep();
  EXPECT_EQ(sweep.size(), 2u * 3u * 2u * 3u);
  const auto best = std::min_element(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) {
    return std::abs(a.relative_error) < std::abs(b.relative_error);
  });
  EXPECT_LT(std::abs(best->relative_error), 0.05);
}

TEST(Flops, RatioAgainstUNet) {
  const double r = static_cast<double>(estimate_flops(make_cfpnet_m(), 128, 256)) /
                   static_cast<double>(estimate_flops(make_unet(64), 128, 256));
  EXPECT_LT(r, 0.05);
}

TEST(Flops, LinearInArea) {
  const auto a = make_cfpnet_m();
  EXPECT_EQ(estimate_flops(a, 256, 256), 2 * estimate_flops(a, 128, 256));
  const auto u = make_unet(32);
  EXPECT_EQ(estimate_flops(u, 256, 256), 2 * estimate_flops(u, 128, 256));
}

TEST(Audit, StageWidthsFollowTheLayerTable) {
  const auto a = make_cfpnet_m();
  const auto& net = std::get<CfpNetM>(a.net);
  std::vector<int> widths;
  for (const auto& u : net.stem) widths.push_back(u.conv.out_channels);
  for (const auto& m : net.stage2) widths.push_back(m.config.resolved_out());
  for (const auto& m : net.stage3) widths.push_back(m.config.resolved_out());
  for (const auto& d : net.decoder) widths.push_back(d.deconv.out_channels);
  widths.push_back(net.head.out_channels);
  EXPECT_EQ(widths, (std::vector<int>{32, 32, 32, 64, 64, 128, 128, 128, 128, 128, 128, 128, 64, 32, 1}));
  EXPECT_EQ(net.stem[0].conv.stride, 2);
  std::vector<int> rk;
  for (const auto& m : net.stage2) rk.push_back(m.config.max_dilation);
  for (const auto& m : net.stage3) rk.push_back(m.config.max_dilation);
  EXPECT_EQ(rk, (std::vector<int>{2, 2, 4, 4, 8, 8, 16, 16}));
}

TEST(Audit, Deterministic) {
  const auto r1 = complexity(make_cfpnet_m(), 128, 256);
  const auto r2 = complexity(make_cfpnet_m(), 128, 256);
  ASSERT_EQ(r1.layers.size(), r2.layers.size());
  for (std::size_t i = 0; i < r1.layers.size(); ++i) {
    EXPECT_EQ(r1.layers[i].name, r2.layers[i].name);
    EXPECT_EQ(r1.layers[i].params, r2.layers[i].params);
    EXPECT_EQ(r1.layers[i].macs, r2.layers[i].macs);
  }
  Model<float> m1(make_cfpnet_m(), 3), m2(make_cfpnet_m(), 3);
  for (std::size_t i = 0; i < m1.params.size(); ++i)
    for (std::size_t k = 0; k < m1.params[i].value.size(); ++k)
      ASSERT_EQ(m1.params[i].value[k], m2.params[i].value[k]);
}

TEST(Shape, RejectsIndivisibleInput) {
  EXPECT_THROW(trace(make_cfpnet_m(), 130, 256), ConfigError);
  NetworkConfig c;
  c.input_width = 250;
  EXPECT_THROW(make_cfpnet_m(c), ConfigError);
  Model<float> m(make_cfpnet_m(), 1);
  EXPECT_THROW(m.forward(Tensor<float>(Shape{1, 3, 100, 100})), ConfigError);
  EXPECT_THROW(m.forward(Tensor<float>(Shape{1, 1, 128, 128})), ArgumentError);
}

class InputSizes : public ::testing::TestWithParam<std::pair<int, int>> {};

TEST_P(InputSizes, OutputCongruentAndInUnitInterval) {
  const auto [w, h] = GetParam();
  Model<float> m(make_cfpnet_m(), 1);
  const auto y = m.forward(random_image(h, w, 5));
  EXPECT_EQ(y.shape(), (Shape{1, 1, h, w}));
  for (float v : y.values()) {
    ASSERT_GT(v, 0.0f);
    ASSERT_LT(v, 1.0f);
  }
}

INSTANTIATE_TEST_SUITE_P(Modalities, InputSizes,
                         ::testing::Values(std::pair{256, 128}, std::pair{256, 256}, std::pair{256, 192}));

TEST(Shape, BatchAndRepeatability) {
  Model<float> m(make_cfpnet_m(), 1);
  const auto x = random_image(64, 64, 8, 2);
  const auto a = m.forward(x);
  const auto b = m.forward(x);
  EXPECT_EQ(a.shape(), (Shape{2, 1, 64, 64}));
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(Shape, UNetShapeContract) {
  Model<float> m(make_unet(8), 1);
  const auto y = m.forward(random_image(64, 64, 2));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 64, 64}));
  for (float v : y.values()) ASSERT_TRUE(v > 0.0f && v < 1.0f);
}

TEST(Shape, AlternativeSwitchesBuildAndRun) {
  for (SkipMode s : {SkipMode::Add, SkipMode::Concat})
    for (InjectionMode inj : {InjectionMode::Concat, InjectionMode::ConcatProject, InjectionMode::Off})
      for (int k : {2, 3, 4})
        for (bool bn : {true, false}) {
          NetworkConfig c;
          c.skip_mode = s;
          c.injection = inj;
          c.deconv_kernel = k;
          c.normalize = bn;
          Model<float> m(make_cfpnet_m(c), 1);
          EXPECT_EQ(m.forward(random_image(32, 40, 1)).shape(), (Shape{1, 1, 32, 40}));
        }
}

TEST(ReceptiveField, Chains) {
  EXPECT_EQ(chain_receptive_field({{"c", "conv", 3, 1, 1}}).rf, 3.0);
  EXPECT_EQ(chain_receptive_field({{"a", "conv", 3, 1, 1}, {"b", "conv", 3, 1, 1}, {"c", "conv", 3, 1, 1}}).rf, 7.0);
  EXPECT_EQ(chain_receptive_field(fp_channel_chain(16)).rf, 97.0);
  EXPECT_NE(chain_receptive_field(fp_channel_chain(16)).rf, static_cast<double>(kClaimedFpChannelField));
  const auto f = chain_receptive_field({{"a", "conv", 3, 2, 1}, {"p", "avgpool", 2, 2, 1}, {"b", "conv", 3, 1, 1}});
  EXPECT_EQ(f.rf, 3.0 + 2.0 + 4.0 * 2.0);
  EXPECT_EQ(f.jump, 4.0);
}

TEST(ReceptiveField, UnsupportedKindNamesLayer) {
  try {
    chain_receptive_field({{"ok", "conv", 3, 1, 1}, {"weird7", "attention", 1, 1, 1}});
    FAIL();
  } catch (const UnsupportedError& e) {
    EXPECT_NE(std::string(e.what()).find("weird7"), std::string::npos);
  }
}

TEST(ReceptiveField, StagesGrowMonotonically) {
  const auto st = receptive_field(make_cfpnet_m(), 128, 256);
  ASSERT_EQ(st.size(), 7u);
  EXPECT_EQ(st.front().name, "stem");
  EXPECT_EQ(st.front().receptive_field, 11.0);  // 3x3/2 then two 3x3 at jump 2
  for (std::size_t i = 1; i < st.size(); ++i) EXPECT_GE(st[i].receptive_field, st[i - 1].receptive_field);
  EXPECT_EQ(st.back().channels, 1);
}
