#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "cfpnet/error.hpp"
#include "cfpnet/params.hpp"

namespace cfpnet {

inline constexpr std::size_t kNoParam = static_cast<std::size_t>(-1);

/// 2-d convolution with "same" padding.
struct ConvLayer {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  std::size_t weight = kNoParam;
  std::size_t bias = kNoParam;

  bool has_bias() const { return bias != kNoParam; }
  std::size_t param_count() const {
    return static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels +
           (has_bias() ? out_channels : 0);
  }
};

/// Transposed convolution producing an exact stride-times upsampling.
struct DeconvLayer {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 2;
  int stride = 2;
  std::size_t weight = kNoParam;
  std::size_t bias = kNoParam;

  bool has_bias() const { return bias != kNoParam; }
  std::size_t param_count() const {
    return static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels +
           (has_bias() ? out_channels : 0);
  }
};

struct BatchNormLayer {
  std::string name;
  int channels = 0;
  double eps = 1e-3;
  double momentum = 0.9;
  std::size_t gamma = kNoParam;
  std::size_t beta = kNoParam;
  std::size_t running_mean = kNoParam;
  std::size_t running_var = kNoParam;

  std::size_t param_count() const { return 2 * static_cast<std::size_t>(channels); }
};

/// Declares layers into a ParamLayout, prefixing names with the current scope.
class LayoutBuilder {
public:
  explicit LayoutBuilder(ParamLayout& layout) : layout_(layout) {}

  ConvLayer conv(const std::string& name, int in, int out, int kernel, int stride = 1,
                 int dilation = 1, bool bias = true) {
    if (in <= 0 || out <= 0) throw ConfigError("conv " + name + ": channel counts must be positive");
    if (kernel <= 0 || kernel % 2 == 0) throw ConfigError("conv " + name + ": kernel must be odd");
    if (stride <= 0 || dilation <= 0) throw ConfigError("conv " + name + ": stride/dilation must be positive");
    ConvLayer c{scoped(name), in, out, kernel, stride, dilation};
    c.weight = layout_.add({c.name + ".weight", Shape{out, in, kernel, kernel}, Init::HeUniform,
                            in * kernel * kernel, true});
    if (bias) c.bias = layout_.add({c.name + ".bias", Shape{1, out, 1, 1}, Init::Zeros, 1, true});
    return c;
  }

  DeconvLayer deconv(const std::string& name, int in, int out, int kernel, int stride, bool bias = true) {
    if (in <= 0 || out <= 0) throw ConfigError("deconv " + name + ": channel counts must be positive");
    if (kernel < stride) throw ConfigError("deconv " + name + ": kernel must be >= stride");
    DeconvLayer d{scoped(name), in, out, kernel, stride};
    // fan-in of each output pixel is in * (k/s)^2 taps on average
    const int fan_in = std::max(1, in * kernel * kernel / (stride * stride));
    d.weight = layout_.add({d.name + ".weight", Shape{in, out, kernel, kernel}, Init::HeUniform, fan_in, true});
    if (bias) d.bias = layout_.add({d.name + ".bias", Shape{1, out, 1, 1}, Init::Zeros, 1, true});
    return d;
  }

  /// zero_gamma starts the layer as a zero map (used on residual branches).
  BatchNormLayer batch_norm(const std::string& name, int channels, bool zero_gamma = false) {
    BatchNormLayer b{scoped(name), channels};
    const Shape s{1, channels, 1, 1};
    b.gamma = layout_.add({b.name + ".gamma", s, zero_gamma ? Init::Zeros : Init::Ones, 1, true});
    b.beta = layout_.add({b.name + ".beta", s, Init::Zeros, 1, true});
    b.running_mean = layout_.add({b.name + ".running_mean", s, Init::Zeros, 1, false});
    b.running_var = layout_.add({b.name + ".running_var", s, Init::Ones, 1, false});
    return b;
  }

  /// RAII name scope.
  class Scope {
  public:
    Scope(LayoutBuilder& b, const std::string& name) : b_(b), saved_(b.prefix_) {
      b_.prefix_ = b_.scoped(name);
    }
    ~Scope() { b_.prefix_ = saved_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

  private:
    LayoutBuilder& b_;
    std::string saved_;
  };

  Scope scope(const std::string& name) { return Scope(*this, name); }
  ParamLayout& layout() { return layout_; }

private:
  std::string scoped(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

  ParamLayout& layout_;
  std::string prefix_;
};

}  // namespace cfpnet
