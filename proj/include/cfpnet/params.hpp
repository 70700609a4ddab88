#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cfpnet/tensor.hpp"

namespace cfpnet {

enum class Init { HeUniform, Zeros, Ones };

/// Declaration of one parameter array; layouts are precision-independent.
struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::Zeros;
  int fan_in = 1;
  bool trainable = true;  // false for batch-norm running statistics
};

/// Ordered set of parameter declarations produced while building an architecture.
class ParamLayout {
public:
  std::size_t add(ParamSpec spec) {
    specs_.push_back(std::move(spec));
    return specs_.size() - 1;
  }

  const std::vector<ParamSpec>& specs() const { return specs_; }
  const ParamSpec& operator[](std::size_t i) const { return specs_[i]; }
  std::size_t size() const { return specs_.size(); }

  /// Element count over trainable arrays.
  std::size_t trainable_count() const {
    std::size_t total = 0;
    for (const auto& s : specs_)
      if (s.trainable) total += s.shape.numel();
    return total;
  }
  std::size_t buffer_count() const {
    std::size_t total = 0;
    for (const auto& s : specs_)
      if (!s.trainable) total += s.shape.numel();
    return total;
  }

private:
  std::vector<ParamSpec> specs_;
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

/// Owns the values and gradients of every array in a layout.
template <typename T>
class ParamStore {
public:
  ParamStore() = default;

  /// Deterministic initialization: arrays are drawn in layout order from one mt19937_64 stream.
  ParamStore(const ParamLayout& layout, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params_.reserve(layout.size());
    for (const auto& spec : layout.specs()) {
      Param<T> p{spec.name, Tensor<T>(spec.shape), Tensor<T>(), spec.trainable};
      switch (spec.init) {
        case Init::Ones:
          p.value.fill(T(1));
          break;
        case Init::Zeros:
          break;
        case Init::HeUniform: {
          const double limit = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
          for (auto& v : p.value.values()) {
            // 53-bit uniform in [0,1); avoids implementation-defined distributions.
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            v = static_cast<T>((2.0 * u - 1.0) * limit);
          }
          break;
        }
      }
      if (spec.trainable) p.grad = Tensor<T>(spec.shape);
      params_.push_back(std::move(p));
    }
  }

  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_)
      if (p.trainable) p.grad.fill(T(0));
  }

private:
  std::vector<Param<T>> params_;
};

}  // namespace cfpnet
