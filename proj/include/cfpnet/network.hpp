#pragma once

// CFPNet-M assembly, the U-Net parameter baseline, and complexity accounting.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cfpnet/blocks.hpp"
#include "cfpnet/context.hpp"
#include "cfpnet/params.hpp"

namespace cfpnet {

enum class SkipMode { Add, Concat };
enum class InjectionMode { Concat, ConcatProject, Off };

inline const char* to_string(SkipMode m) { return m == SkipMode::Add ? "add" : "concat"; }
inline const char* to_string(InjectionMode m) {
  switch (m) {
    case InjectionMode::Concat: return "concat";
    case InjectionMode::ConcatProject: return "concat+1x1";
    case InjectionMode::Off: return "off";
  }
  return "?";
}

struct NetworkConfig {
  int input_height = 128;
  int input_width = 256;
  int input_channels = 3;
  std::array<int, 3> stage_widths{32, 64, 128};
  std::vector<int> stage2_dilations{2, 2};                 // n = 2
  std::vector<int> stage3_dilations{4, 4, 8, 8, 16, 16};   // m = 6
  SkipMode skip_mode = SkipMode::Add;
  int deconv_kernel = 4;
  InjectionMode injection = InjectionMode::Concat;
  bool normalize = true;
};

/// Decoder step: stride-2 deconvolution, optional encoder skip, ReLU.
struct DecoderStage {
  DeconvLayer deconv;
  std::optional<BatchNormLayer> bn;
  SkipMode mode = SkipMode::Add;
  std::optional<ConvLayer> skip_project;  // Add mode, widths differ
  std::optional<ConvUnit> fuse;           // Concat mode

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& x,
                            const std::optional<typename Ctx::Value>& skip) const {
    auto y = ctx.deconv(deconv, x);
    if (bn) y = ctx.batch_norm(*bn, y);
    if (!skip) return ctx.relu(y);
    if (mode == SkipMode::Add) {
      auto s = skip_project ? ctx.conv(*skip_project, *skip) : *skip;
      return ctx.relu(ctx.add(y, s));
    }
    return fuse->apply(ctx, ctx.concat({ctx.relu(y), *skip}));
  }
};

struct CfpNetM {
  NetworkConfig config;
  std::array<ConvUnit, 3> stem;
  std::vector<CfpModule> stage2;
  std::vector<CfpModule> stage3;
  std::optional<ConvUnit> injection_project;
  std::array<DecoderStage, 3> decoder;
  ConvLayer head;

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& image) const {
    using V = typename Ctx::Value;
    auto x = image;
    for (const auto& u : stem) x = u.apply(ctx, x);
    const V s1 = ctx.stage("stem", x);

    x = ctx.avg_pool(s1, 2);
    for (const auto& m : stage2) x = m.apply(ctx, x);
    const V s2 = ctx.stage("cfp-1", x);

    x = ctx.avg_pool(s2, 2);
    for (const auto& m : stage3) x = m.apply(ctx, x);
    x = ctx.stage("cfp-2", x);

    if (config.injection != InjectionMode::Off) {
      auto injected = ctx.concat({x, ctx.avg_pool(image, 8)});
      x = injection_project ? injection_project->apply(ctx, injected) : injected;
    }
    x = ctx.stage("decoder-1", decoder[0].apply(ctx, x, std::optional<V>(s2)));
    x = ctx.stage("decoder-2", decoder[1].apply(ctx, x, std::optional<V>(s1)));
    x = ctx.stage("decoder-3", decoder[2].apply(ctx, x, std::nullopt));
    return ctx.stage("head", ctx.sigmoid(ctx.conv(head, x)));
  }
};

inline void validate_input_size(int h, int w, int multiple, const std::string& what) {
  if (h <= 0 || w <= 0 || h % multiple != 0 || w % multiple != 0) {
    throw ConfigError(what + " input " + std::to_string(w) + "x" + std::to_string(h) +
                      " must have both sides divisible by " + std::to_string(multiple));
  }
}

inline void validate(const NetworkConfig& c) {
  validate_input_size(c.input_height, c.input_width, 8, "CFPNet-M");
  if (c.input_channels <= 0) throw ConfigError("input channels must be positive");
  if (c.stage2_dilations.empty() || c.stage3_dilations.empty())
    throw ConfigError("each CFP cluster needs at least one module");
  if (c.deconv_kernel < 2 || c.deconv_kernel > 5)
    throw ConfigError("deconvolution kernel must be in [2, 5], got " + std::to_string(c.deconv_kernel));
}

inline CfpNetM build_cfpnet_m(LayoutBuilder& b, const NetworkConfig& config) {
  validate(config);
  CfpNetM net;
  net.config = config;
  const bool bn = config.normalize;
  const auto [w1, w2, w3] = config.stage_widths;

  net.stem[0] = ConvUnit::make(b, "stem.conv1", config.input_channels, w1, 3, 2, 1, bn);
  net.stem[1] = ConvUnit::make(b, "stem.conv2", w1, w1, 3, 1, 1, bn);
  net.stem[2] = ConvUnit::make(b, "stem.conv3", w1, w1, 3, 1, 1, bn);

  int width = w1;
  for (std::size_t i = 0; i < config.stage2_dilations.size(); ++i) {
    net.stage2.push_back(build_cfp_module(b, "cfp1." + std::to_string(i + 1),
                                          CfpModuleConfig{width, w2, 4, config.stage2_dilations[i], bn}));
    width = w2;
  }
  for (std::size_t i = 0; i < config.stage3_dilations.size(); ++i) {
    net.stage3.push_back(build_cfp_module(b, "cfp2." + std::to_string(i + 1),
                                          CfpModuleConfig{width, w3, 4, config.stage3_dilations[i], bn}));
    width = w3;
  }

  int deepest = w3;
  if (config.injection == InjectionMode::Concat) deepest = w3 + config.input_channels;
  if (config.injection == InjectionMode::ConcatProject)
    net.injection_project = ConvUnit::make(b, "inject.project", w3 + config.input_channels, w3, 1, 1, 1, bn);

  const std::array<int, 3> dec_in{deepest, w3, w2};
  const std::array<int, 3> dec_out{w3, w2, w1};
  const std::array<int, 3> skip_width{w2, w1, 0};
  for (std::size_t i = 0; i < 3; ++i) {
    auto scope = b.scope("decoder" + std::to_string(i + 1));
    DecoderStage& d = net.decoder[i];
    d.mode = config.skip_mode;
    d.deconv = b.deconv("deconv", dec_in[i], dec_out[i], config.deconv_kernel, 2, /*bias=*/!bn);
    if (bn) d.bn = b.batch_norm("deconv_bn", dec_out[i]);
    if (skip_width[i] == 0) continue;
    if (config.skip_mode == SkipMode::Add) {
      if (skip_width[i] != dec_out[i]) d.skip_project = b.conv("skip_project", skip_width[i], dec_out[i], 1);
    } else {
      d.fuse = ConvUnit::make(b, "fuse", dec_out[i] + skip_width[i], dec_out[i], 1, 1, 1, bn);
    }
  }
  net.head = b.conv("head", w1, 1, 1);
  return net;
}

/// Classic 5-level U-Net (two 3x3 conv+ReLU per level, 2x2 max pool, 2x2 up-convolution, concat skips).
struct UNet {
  int base_width = 64;
  int input_channels = 3;
  std::vector<std::array<ConvUnit, 2>> encoder;
  std::vector<DeconvLayer> up;
  std::vector<std::array<ConvUnit, 2>> decoder;
  ConvLayer head;

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& image) const {
    using V = typename Ctx::Value;
    std::vector<V> skips;
    V x = image;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
      if (i > 0) x = ctx.max_pool(x, 2);
      x = encoder[i][1].apply(ctx, encoder[i][0].apply(ctx, x));
      x = ctx.stage("enc" + std::to_string(i + 1), x);
      skips.push_back(x);
    }
    for (std::size_t i = 0; i < up.size(); ++i) {
      auto u = ctx.relu(ctx.deconv(up[i], x));
      x = ctx.concat({skips[skips.size() - 2 - i], u});
      x = decoder[i][1].apply(ctx, decoder[i][0].apply(ctx, x));
      x = ctx.stage("dec" + std::to_string(i + 1), x);
    }
    return ctx.sigmoid(ctx.conv(head, x));
  }
};

inline UNet build_unet_baseline(LayoutBuilder& b, int base_width = 64, int input_channels = 3) {
  if (base_width <= 0 || (base_width & (base_width - 1)) != 0)
    throw ConfigError("U-Net base width must be a power of two, got " + std::to_string(base_width));
  UNet net;
  net.base_width = base_width;
  net.input_channels = input_channels;
  int in = input_channels;
  for (int level = 0; level < 5; ++level) {
    const int w = base_width << level;
    const std::string n = "enc" + std::to_string(level + 1);
    net.encoder.push_back({ConvUnit::make(b, n + ".conv1", in, w, 3, 1, 1, false),
                           ConvUnit::make(b, n + ".conv2", w, w, 3, 1, 1, false)});
    in = w;
  }
  for (int level = 3; level >= 0; --level) {
    const int w = base_width << level;
    const std::string n = "dec" + std::to_string(4 - level);
    net.up.push_back(b.deconv(n + ".up", 2 * w, w, 2, 2, true));
    net.decoder.push_back({ConvUnit::make(b, n + ".conv1", 2 * w, w, 3, 1, 1, false),
                           ConvUnit::make(b, n + ".conv2", w, w, 3, 1, 1, false)});
  }
  net.head = b.conv("head", base_width, 1, 1);
  return net;
}

/// A built architecture with its parameter declarations (no numeric storage).
struct Architecture {
  std::string name;
  std::variant<CfpNetM, UNet> net;
  ParamLayout layout;
  int input_channels = 3;
  int size_multiple = 8;

  template <class Ctx>
  typename Ctx::Value apply(Ctx& ctx, const typename Ctx::Value& x) const {
    return std::visit([&](const auto& n) { return n.apply(ctx, x); }, net);
  }
};

inline Architecture make_cfpnet_m(const NetworkConfig& config = {}) {
  Architecture a;
  a.name = "cfpnet-m";
  LayoutBuilder b(a.layout);
  a.net = build_cfpnet_m(b, config);
  a.input_channels = config.input_channels;
  a.size_multiple = 8;
  return a;
}

inline Architecture make_unet(int base_width = 64) {
  Architecture a;
  a.name = "unet-" + std::to_string(base_width);
  LayoutBuilder b(a.layout);
  a.net = build_unet_baseline(b, base_width);
  a.input_channels = 3;
  a.size_multiple = 16;
  return a;
}

/// Model = architecture + numeric parameters.
template <typename T>
struct Model {
  Architecture arch;
  ParamStore<T> params;

  Model(Architecture a, std::uint64_t seed) : arch(std::move(a)), params(arch.layout, seed) {}

  /// Inference (running batch-norm statistics, no tape).
  Tensor<T> forward(const Tensor<T>& input) {
    check_input(input.shape());
    EvalContext<T> ctx(params, /*training=*/false, /*record=*/false);
    return arch.apply(ctx, ctx.input(input)).value();
  }

  void check_input(const Shape& s) const {
    if (s.c != arch.input_channels)
      throw ArgumentError(arch.name + ": expected " + std::to_string(arch.input_channels) + " input channels, got " +
                          std::to_string(s.c));
    validate_input_size(s.h, s.w, arch.size_multiple, arch.name);
  }
};

// ---- complexity accounting ----

struct LayerAuditRow {
  std::string name;
  std::string kind;
  int out_c, out_h, out_w;
  int kernel, stride, dilation;
  std::size_t params;
  std::size_t macs;
};

struct StageField {
  std::string name;
  int channels;
  int height;
  int width;
  double receptive_field;
};

struct ComplexityReport {
  std::string model;
  int input_height = 0;
  int input_width = 0;
  std::size_t parameter_count = 0;
  std::size_t buffer_count = 0;
  std::size_t flops = 0;  // multiply-accumulates
  std::vector<StageField> receptive_field_per_stage;
  std::vector<LayerAuditRow> layers;
  std::size_t serialized_size = 0;  // bytes of a float32 checkpoint, informational
};

inline TraceContext trace(const Architecture& arch, int height, int width) {
  validate_input_size(height, width, arch.size_multiple, arch.name);
  TraceContext ctx;
  arch.apply(ctx, ctx.input(arch.input_channels, height, width));
  return ctx;
}

/// Exact trainable element count (batch-norm running statistics excluded).
inline std::size_t count_parameters(const Architecture& arch) { return arch.layout.trainable_count(); }

/// Multiply-accumulate count at the given input size.
inline std::size_t estimate_flops(const Architecture& arch, int height, int width) {
  return trace(arch, height, width).total_macs();
}

inline std::vector<StageField> receptive_field(const Architecture& arch, int height, int width) {
  std::vector<StageField> out;
  const TraceContext t = trace(arch, height, width);
  for (const auto& s : t.stages()) out.push_back({s.name, s.c, s.h, s.w, s.rf});
  return out;
}

inline ComplexityReport complexity(const Architecture& arch, int height, int width) {
  const TraceContext t = trace(arch, height, width);
  ComplexityReport r;
  r.model = arch.name;
  r.input_height = height;
  r.input_width = width;
  r.parameter_count = count_parameters(arch);
  r.buffer_count = arch.layout.buffer_count();
  r.flops = t.total_macs();
  for (const auto& s : t.stages()) r.receptive_field_per_stage.push_back({s.name, s.c, s.h, s.w, s.rf});
  for (const auto& l : t.layers()) {
    if (l.kind != LayerKind::Conv && l.kind != LayerKind::Deconv && l.kind != LayerKind::BatchNorm &&
        l.kind != LayerKind::AvgPool && l.kind != LayerKind::MaxPool)
      continue;
    r.layers.push_back({l.name, to_string(l.kind), l.out_c, l.out_h, l.out_w, l.kernel, l.stride, l.dilation, l.params,
                        l.macs});
  }
  return r;
}

/// One point of the ambiguity sweep (skip x deconv kernel x normalization x injection).
struct SweepPoint {
  NetworkConfig config;
  std::size_t parameters;
  double relative_error;
};

inline std::vector<SweepPoint> parameter_sweep(std::size_t target = 654279) {
  std::vector<SweepPoint> out;
  for (SkipMode skip : {SkipMode::Add, SkipMode::Concat}) {
    for (int k : {2, 3, 4}) {
      for (bool bn : {true, false}) {
        for (InjectionMode inj : {InjectionMode::Concat, InjectionMode::ConcatProject, InjectionMode::Off}) {
          NetworkConfig c;
          c.skip_mode = skip;
          c.deconv_kernel = k;
          c.normalize = bn;
          c.injection = inj;
          const std::size_t p = count_parameters(make_cfpnet_m(c));
          out.push_back({c, p, static_cast<double>(p) / static_cast<double>(target) - 1.0});
        }
      }
    }
  }
  return out;
}

}  // namespace cfpnet
