#pragma once

// Execution contexts.  Network structure is written once as
//   template <class Ctx> typename Ctx::Value apply(Ctx&, typename Ctx::Value)
// and evaluated either numerically (EvalContext, with an optional gradient
// tape) or symbolically (TraceContext: shapes, MACs, receptive field).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cfpnet/autograd.hpp"
#include "cfpnet/error.hpp"
#include "cfpnet/kernels.hpp"
#include "cfpnet/layers.hpp"
#include "cfpnet/params.hpp"

namespace cfpnet {

template <typename T>
class EvalContext {
public:
  using Value = Var<T>;

  /// training selects batch statistics for batch norm; record builds the gradient tape.
  EvalContext(ParamStore<T>& params, bool training, bool record)
      : params_(params), training_(training), record_(record) {}

  bool training() const { return training_; }
  bool recording() const { return record_; }

  Value input(Tensor<T> x, bool requires_grad = false) {
    Value v(std::move(x));
    v.node()->requires_grad = requires_grad && record_;
    return v;
  }

  Value conv(const ConvLayer& layer, const Value& x) {
    const Shape& s = x.shape();
    if (s.c != layer.in_channels) {
      throw ArgumentError(layer.name + ": expected " + std::to_string(layer.in_channels) +
                          " input channels, got " + std::to_string(s.c));
    }
    const auto g = kernels::same_conv_geometry(s.h, s.w, layer.kernel, layer.stride, layer.dilation);
    Param<T>* w = &params_[layer.weight];
    Param<T>* b = layer.has_bias() ? &params_[layer.bias] : nullptr;
    Tensor<T> y = kernels::conv2d_forward(x.value(), w->value, b ? &b->value : nullptr, g);
    return make(std::move(y), {x}, [g, w, b](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      kernels::conv2d_backward(in.value, w->value, self.grad, g, in.requires_grad ? &in.grad_buffer() : nullptr,
                               &w->grad, b ? &b->grad : nullptr);
    });
  }

  Value deconv(const DeconvLayer& layer, const Value& x) {
    const Shape& s = x.shape();
    if (s.c != layer.in_channels) {
      throw ArgumentError(layer.name + ": expected " + std::to_string(layer.in_channels) +
                          " input channels, got " + std::to_string(s.c));
    }
    const auto g = kernels::transposed_geometry(s.h, s.w, layer.kernel, layer.stride);
    Param<T>* w = &params_[layer.weight];
    Param<T>* b = layer.has_bias() ? &params_[layer.bias] : nullptr;
    Tensor<T> y = kernels::deconv2d_forward(x.value(), w->value, b ? &b->value : nullptr, g);
    return make(std::move(y), {x}, [g, w, b](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      kernels::deconv2d_backward(in.value, w->value, self.grad, g, in.requires_grad ? &in.grad_buffer() : nullptr,
                                 &w->grad, b ? &b->grad : nullptr);
    });
  }

  Value batch_norm(const BatchNormLayer& layer, const Value& x) {
    const Shape& s = x.shape();
    if (s.c != layer.channels) throw ArgumentError(layer.name + ": channel mismatch");
    Param<T>* gamma = &params_[layer.gamma];
    Param<T>* beta = &params_[layer.beta];
    Param<T>& rmean = params_[layer.running_mean];
    Param<T>& rvar = params_[layer.running_var];
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(s.n) * plane;

    std::vector<T> mean(s.c), inv_std(s.c);
    if (training_) {
      for (int c = 0; c < s.c; ++c) {
        double sum = 0, sq = 0;
        for (int n = 0; n < s.n; ++n) {
          const T* p = x.value().plane(n, c);
          for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        const double mu = sum / count;
        for (int n = 0; n < s.n; ++n) {
          const T* p = x.value().plane(n, c);
          for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mu) * (p[i] - mu);
        }
        const double var = sq / count;
        mean[c] = static_cast<T>(mu);
        inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + layer.eps));
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        rmean.value[c] = static_cast<T>(layer.momentum * rmean.value[c] + (1 - layer.momentum) * mu);
        rvar.value[c] = static_cast<T>(layer.momentum * rvar.value[c] + (1 - layer.momentum) * unbiased);
      }
    } else {
      for (int c = 0; c < s.c; ++c) {
        mean[c] = rmean.value[c];
        inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rvar.value[c]) + layer.eps));
      }
    }

    Tensor<T> xhat(s);
    Tensor<T> y(s);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const T* p = x.value().plane(n, c);
        T* h = xhat.plane(n, c);
        T* o = y.plane(n, c);
        const T g = gamma->value[c], bt = beta->value[c];
        for (std::size_t i = 0; i < plane; ++i) {
          h[i] = (p[i] - mean[c]) * inv_std[c];
          o[i] = g * h[i] + bt;
        }
      }
    }
    const bool batch_stats = training_;
    return make(std::move(y), {x}, [xhat = std::move(xhat), inv_std, gamma, beta, batch_stats, count](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      const Shape& s = self.value.shape();
      const std::size_t plane = s.plane();
      for (int c = 0; c < s.c; ++c) {
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int n = 0; n < s.n; ++n) {
          const T* dy = self.grad.plane(n, c);
          const T* h = xhat.plane(n, c);
          for (std::size_t i = 0; i < plane; ++i) {
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * h[i];
          }
        }
        gamma->grad[c] += static_cast<T>(sum_dy_xhat);
        beta->grad[c] += static_cast<T>(sum_dy);
        if (!in.requires_grad) continue;
        const T g = gamma->value[c];
        Tensor<T>& dx = in.grad_buffer();
        for (int n = 0; n < s.n; ++n) {
          const T* dy = self.grad.plane(n, c);
          const T* h = xhat.plane(n, c);
          T* d = dx.plane(n, c);
          if (batch_stats) {
            const T k = g * inv_std[c] / static_cast<T>(count);
            const T mdy = static_cast<T>(sum_dy);
            const T mdyh = static_cast<T>(sum_dy_xhat);
            for (std::size_t i = 0; i < plane; ++i)
              d[i] += k * (static_cast<T>(count) * dy[i] - mdy - h[i] * mdyh);
          } else {
            for (std::size_t i = 0; i < plane; ++i) d[i] += g * inv_std[c] * dy[i];
          }
        }
      }
    });
  }

  Value relu(const Value& x) {
    Tensor<T> y = x.value();
    for (auto& v : y.values()) v = v < T(0) ? T(0) : v;  // NaN passes through
    return make(std::move(y), {x}, [](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      if (!in.requires_grad) return;
      Tensor<T>& dx = in.grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (self.value[i] > T(0)) dx[i] += self.grad[i];
    });
  }

  Value sigmoid(const Value& x) {
    Tensor<T> y = x.value();
    for (auto& v : y.values()) v = T(1) / (T(1) + std::exp(-v));
    return make(std::move(y), {x}, [](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      if (!in.requires_grad) return;
      Tensor<T>& dx = in.grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const T s = self.value[i];
        dx[i] += self.grad[i] * s * (T(1) - s);
      }
    });
  }

  Value add(const Value& a, const Value& b) {
    a.value().require_same(b.value(), "add");
    Tensor<T> y = a.value();
    y += b.value();
    return make(std::move(y), {a, b}, [](Node<T>& self) {
      for (auto& p : self.parents)
        if (p->requires_grad) p->grad_buffer() += self.grad;
    });
  }

  /// Channel-wise concatenation.
  Value concat(const std::vector<Value>& parts) {
    if (parts.empty()) throw ArgumentError("concat of zero tensors");
    Shape out = parts.front().shape();
    out.c = 0;
    for (const auto& p : parts) {
      const Shape& s = p.shape();
      if (s.n != out.n || s.h != out.h || s.w != out.w)
        throw ArgumentError("concat spatial mismatch: " + parts.front().shape().str() + " vs " + s.str());
      out.c += s.c;
    }
    Tensor<T> y(out);
    const std::size_t plane = out.plane();
    for (int n = 0; n < out.n; ++n) {
      T* dst = y.sample(n);
      for (const auto& p : parts) {
        const std::size_t len = static_cast<std::size_t>(p.shape().c) * plane;
        std::copy_n(p.value().sample(n), len, dst);
        dst += len;
      }
    }
    return make(std::move(y), parts, [](Node<T>& self) {
      const Shape& s = self.value.shape();
      std::size_t offset = 0;
      for (auto& p : self.parents) {
        const std::size_t len = static_cast<std::size_t>(p->value.shape().c) * s.plane();
        if (p->requires_grad) {
          Tensor<T>& g = p->grad_buffer();
          for (int n = 0; n < s.n; ++n) {
            const T* src = self.grad.sample(n) + offset;
            T* dst = g.sample(n);
            for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
          }
        }
        offset += len;
      }
    });
  }

  Value avg_pool(const Value& x, int factor) {
    check_pool(x.shape(), factor);
    Tensor<T> y = kernels::avg_pool_forward(x.value(), factor);
    return make(std::move(y), {x}, [factor](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      if (in.requires_grad) kernels::avg_pool_backward(self.grad, factor, in.grad_buffer());
    });
  }

  Value max_pool(const Value& x, int factor) {
    check_pool(x.shape(), factor);
    std::vector<std::size_t> argmax;
    Tensor<T> y = kernels::max_pool_forward(x.value(), factor, argmax);
    return make(std::move(y), {x}, [argmax = std::move(argmax)](Node<T>& self) {
      Node<T>& in = *self.parents[0];
      if (!in.requires_grad) return;
      Tensor<T>& dx = in.grad_buffer();
      for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += self.grad[i];
    });
  }

  Value stage(const std::string&, const Value& x) { return x; }

private:
  static void check_pool(const Shape& s, int factor) {
    if (factor <= 0 || s.h % factor != 0 || s.w % factor != 0)
      throw ArgumentError("pooling factor " + std::to_string(factor) + " does not divide " + s.str());
  }

  template <typename Fn>
  Value make(Tensor<T> value, const std::vector<Value>& parents, Fn&& fn) {
    Value out(std::move(value));
    if (!record_) return out;
    auto node = out.node();
    for (const auto& p : parents) node->parents.push_back(p.node());
    // interior nodes always carry gradients so parameter updates reach every layer
    node->requires_grad = true;
    node->backward = std::forward<Fn>(fn);
    return out;
  }

  ParamStore<T>& params_;
  bool training_;
  bool record_;
};

/// Layer kinds recognised by the geometry tracer.
enum class LayerKind { Conv, Deconv, BatchNorm, ReLU, Sigmoid, AvgPool, MaxPool, Add, Concat };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Deconv: return "deconv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Add: return "add";
    case LayerKind::Concat: return "concat";
  }
  return "?";
}

/// Symbolic value: channel/spatial extent plus receptive-field state
/// (rf = extent in input pixels, jump = input pixels between adjacent outputs).
struct TraceValue {
  int c = 0;
  int h = 0;
  int w = 0;
  double rf = 1;
  double jump = 1;
};

struct LayerRecord {
  std::string name;
  LayerKind kind;
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int kernel = 0;
  int stride = 1;
  int dilation = 1;
  std::size_t params = 0;
  std::size_t macs = 0;
  double rf = 1;
};

struct StageRecord {
  std::string name;
  int c, h, w;
  double rf;
  double jump;
};

class TraceContext {
public:
  using Value = TraceValue;

  Value input(int c, int h, int w) const { return Value{c, h, w, 1.0, 1.0}; }

  Value conv(const ConvLayer& l, const Value& x) {
    if (x.c != l.in_channels) throw ArgumentError(l.name + ": channel mismatch in trace");
    const auto g = kernels::same_conv_geometry(x.h, x.w, l.kernel, l.stride, l.dilation);
    Value y{l.out_channels, g.out_h, g.out_w, x.rf + (l.dilation * (l.kernel - 1)) * x.jump, x.jump * l.stride};
    const std::size_t macs = g.out_plane() * l.out_channels * l.kernel * l.kernel * static_cast<std::size_t>(l.in_channels);
    push(l.name, LayerKind::Conv, x, y, l.kernel, l.stride, l.dilation, l.param_count(), macs);
    return y;
  }

  Value deconv(const DeconvLayer& l, const Value& x) {
    if (x.c != l.in_channels) throw ArgumentError(l.name + ": channel mismatch in trace");
    const int span = (l.kernel + l.stride - 1) / l.stride;
    Value y{l.out_channels, x.h * l.stride, x.w * l.stride, x.rf + (span - 1) * x.jump, x.jump / l.stride};
    const std::size_t macs = static_cast<std::size_t>(x.h) * x.w * x.c * l.out_channels * l.kernel * l.kernel;
    push(l.name, LayerKind::Deconv, x, y, l.kernel, l.stride, 1, l.param_count(), macs);
    return y;
  }

  Value batch_norm(const BatchNormLayer& l, const Value& x) {
    push(l.name, LayerKind::BatchNorm, x, x, 0, 1, 1, l.param_count(), 0);
    return x;
  }
  Value relu(const Value& x) { return x; }
  Value sigmoid(const Value& x) { return x; }

  Value add(const Value& a, const Value& b) {
    if (a.c != b.c || a.h != b.h || a.w != b.w) throw ArgumentError("add shape mismatch in trace");
    Value y = a;
    y.rf = std::max(a.rf, b.rf);
    y.jump = std::max(a.jump, b.jump);
    return y;
  }

  Value concat(const std::vector<Value>& parts) {
    if (parts.empty()) throw ArgumentError("concat of zero tensors");
    Value y = parts.front();
    y.c = 0;
    for (const auto& p : parts) {
      if (p.h != y.h || p.w != y.w) throw ArgumentError("concat spatial mismatch in trace");
      y.c += p.c;
      y.rf = std::max(y.rf, p.rf);
      y.jump = std::max(y.jump, p.jump);
    }
    return y;
  }

  Value avg_pool(const Value& x, int f) { return pool(x, f, LayerKind::AvgPool); }
  Value max_pool(const Value& x, int f) { return pool(x, f, LayerKind::MaxPool); }

  Value stage(const std::string& name, const Value& x) {
    stages_.push_back({name, x.c, x.h, x.w, x.rf, x.jump});
    return x;
  }

  const std::vector<LayerRecord>& layers() const { return layers_; }
  const std::vector<StageRecord>& stages() const { return stages_; }

  std::size_t total_macs() const {
    std::size_t t = 0;
    for (const auto& l : layers_) t += l.macs;
    return t;
  }
  std::size_t total_params() const {
    std::size_t t = 0;
    for (const auto& l : layers_) t += l.params;
    return t;
  }

private:
  Value pool(const Value& x, int f, LayerKind kind) {
    if (f <= 0 || x.h % f != 0 || x.w % f != 0) throw ArgumentError("pooling factor does not divide input in trace");
    Value y{x.c, x.h / f, x.w / f, x.rf + (f - 1) * x.jump, x.jump * f};
    push(to_string(kind), kind, x, y, f, f, 1, 0, 0);
    return y;
  }

  void push(const std::string& name, LayerKind kind, const Value& in, const Value& out, int k, int s, int d,
            std::size_t params, std::size_t macs) {
    layers_.push_back({name, kind, in.c, in.h, in.w, out.c, out.h, out.w, k, s, d, params, macs, out.rf});
  }

  std::vector<LayerRecord> layers_;
  std::vector<StageRecord> stages_;
};

}  // namespace cfpnet
