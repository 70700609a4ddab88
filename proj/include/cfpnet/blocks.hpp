#pragma once

// Feature Pyramid (FP) channels and Channel-wise Feature Pyramid (CFP) modules.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cfpnet/context.hpp"
#include "cfpnet/error.hpp"
#include "cfpnet/layers.hpp"

namespace cfpnet {

/// Spatial extent covered by an n x n kernel with dilation r: r(n-1)+1.
inline int effective_kernel_size(int n, int r) {
  if (n <= 0 || n % 2 == 0) throw ArgumentError("kernel size must be odd and positive, got " + std::to_string(n));
  if (r <= 0) throw ArgumentError("dilation rate must be positive, got " + std::to_string(r));
  return r * (n - 1) + 1;
}

struct FilterSplit {
  int first = 0;
  int second = 0;
  int third = 0;
  int total() const { return first + second + third; }
  bool operator==(const FilterSplit&) const = default;
};

/// N/4, N/4, N/2 filters for the three stacked operators of an FP channel.
inline FilterSplit allocate_fp_filters(int budget) {
  if (budget <= 0 || budget % 4 != 0)
    throw ConfigError("FP channel width must be a positive multiple of 4, got " + std::to_string(budget));
  return {budget / 4, budget / 4, budget / 2};
}

/// Per-channel dilation rates [1, r/4, r/2, r] (each floored to at least 1) for K = 4.
inline std::vector<int> assign_channel_dilations(int max_dilation, int channel_count = 4) {
  if (channel_count != 4)
    throw UnsupportedError("dilation assignment is only defined for 4 FP channels, got " +
                           std::to_string(channel_count));
  if (max_dilation < 1) throw ArgumentError("maximum dilation must be >= 1");
  return {1, std::max(1, max_dilation / 4), std::max(1, max_dilation / 2), max_dilation};
}

/// Convolution followed by optional batch norm and optional ReLU.
struct ConvUnit {
  ConvLayer conv;
  std::optional<BatchNormLayer> bn;
  bool relu = true;

  static ConvUnit make(LayoutBuilder& b, const std::string& name, int in, int out, int kernel, int stride,
                       int dilation, bool normalize, bool relu = true) {
    ConvUnit u;
    u.conv = b.conv(name, in, out, kernel, stride, dilation, /*bias=*/!normalize);
    if (normalize) u.bn = b.batch_norm(name + "_bn", out);
    u.relu = relu;
    return u;
  }

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& x) const {
    auto y = ctx.conv(conv, x);
    if (bn) y = ctx.batch_norm(*bn, y);
    if (relu) y = ctx.relu(y);
    return y;
  }
};

struct FpChannelConfig {
  int channels = 0;  // N: input width, equal to output width
  int dilation = 1;
  bool normalize = true;
};

/// Three stacked 3x3 dilated operators whose outputs are concatenated back to N channels.
struct FpChannel {
  FpChannelConfig config;
  FilterSplit split;
  std::array<ConvUnit, 3> ops;

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& x) const {
    auto a = ops[0].apply(ctx, x);
    auto b = ops[1].apply(ctx, a);
    auto c = ops[2].apply(ctx, b);
    return ctx.concat({a, b, c});
  }
};

inline FpChannel build_fp_channel(LayoutBuilder& b, const std::string& name, const FpChannelConfig& config) {
  if (config.dilation < 1) throw ConfigError("FP channel dilation must be >= 1");
  FpChannel ch;
  ch.config = config;
  ch.split = allocate_fp_filters(config.channels);
  auto scope = b.scope(name);
  const int d = config.dilation;
  ch.ops[0] = ConvUnit::make(b, "op1", config.channels, ch.split.first, 3, 1, d, config.normalize);
  ch.ops[1] = ConvUnit::make(b, "op2", ch.split.first, ch.split.second, 3, 1, d, config.normalize);
  ch.ops[2] = ConvUnit::make(b, "op3", ch.split.second, ch.split.third, 3, 1, d, config.normalize);
  return ch;
}

/// Hierarchical feature fusion: output_i = branch_1 + ... + branch_i.
template <class Ctx>
std::vector<typename Ctx::Value> hff_combine(Ctx& ctx, const std::vector<typename Ctx::Value>& branches) {
  if (branches.empty()) throw ArgumentError("hff_combine needs at least one branch");
  std::vector<typename Ctx::Value> fused;
  fused.reserve(branches.size());
  fused.push_back(branches.front());
  for (std::size_t i = 1; i < branches.size(); ++i) fused.push_back(ctx.add(fused.back(), branches[i]));
  return fused;
}

struct CfpModuleConfig {
  int in_channels = 0;   // M
  int out_channels = 0;  // 0 means M
  int channel_count = 4; // K
  int max_dilation = 1;  // r_K
  bool normalize = true;

  int resolved_out() const { return out_channels > 0 ? out_channels : in_channels; }
  int channel_width() const { return in_channels / channel_count; }
};

/// 1x1 reduction, K parallel FP channels, HFF, concatenation, 1x1 projection, residual add.
struct CfpModule {
  CfpModuleConfig config;
  std::vector<int> dilations;
  ConvUnit reduce;
  std::vector<FpChannel> channels;
  ConvLayer project;
  std::optional<BatchNormLayer> project_bn;
  std::optional<ConvLayer> shortcut;  // set when the module widens its input

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& x) const {
    auto reduced = reduce.apply(ctx, x);
    std::vector<typename Ctx::Value> branches;
    branches.reserve(channels.size());
    for (const auto& ch : channels) branches.push_back(ch.apply(ctx, reduced));
    auto fused = ctx.concat(hff_combine(ctx, branches));
    auto y = ctx.conv(project, fused);
    if (project_bn) y = ctx.batch_norm(*project_bn, y);
    auto skip = shortcut ? ctx.conv(*shortcut, x) : x;
    return ctx.relu(ctx.add(y, skip));
  }
};

inline CfpModule build_cfp_module(LayoutBuilder& b, const std::string& name, const CfpModuleConfig& config) {
  const int m = config.in_channels;
  const int k = config.channel_count;
  if (m <= 0 || k <= 0 || m % (4 * k) != 0)
    throw ConfigError("CFP module input width " + std::to_string(m) + " must be divisible by 4K = " +
                      std::to_string(4 * k));
  if (config.resolved_out() < m)
    throw ConfigError("CFP module cannot narrow its input (" + std::to_string(m) + " -> " +
                      std::to_string(config.resolved_out()) + ")");
  CfpModule mod;
  mod.config = config;
  mod.dilations = assign_channel_dilations(config.max_dilation, k);
  auto scope = b.scope(name);
  const int width = m / k;
  mod.reduce = ConvUnit::make(b, "reduce", m, width, 1, 1, 1, config.normalize);
  for (int i = 0; i < k; ++i) {
    mod.channels.push_back(build_fp_channel(
        b, "fp" + std::to_string(i + 1), FpChannelConfig{width, mod.dilations[static_cast<std::size_t>(i)], config.normalize}));
  }
  const int out = config.resolved_out();
  mod.project = b.conv("project", m, out, 1, 1, 1, /*bias=*/!config.normalize);
  if (config.normalize) mod.project_bn = b.batch_norm("project_bn", out, /*zero_gamma=*/true);
  if (out != m) mod.shortcut = b.conv("shortcut", m, out, 1, 1, 1, true);
  return mod;
}

}  // namespace cfpnet
