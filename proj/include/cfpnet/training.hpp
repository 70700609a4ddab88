#pragma once

// Adam on binary cross-entropy, best-validation checkpointing, prediction.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cfpnet/autograd.hpp"
#include "cfpnet/context.hpp"
#include "cfpnet/data.hpp"
#include "cfpnet/error.hpp"
#include "cfpnet/metrics.hpp"
#include "cfpnet/network.hpp"

namespace cfpnet {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  int epochs = 150;
  int batch_size = 4;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.batch_size < 1) throw ConfigError("batch size must be >= 1");
}

inline constexpr double kBceClip = 1e-7;

/// Mean binary cross-entropy with predictions clipped to [eps, 1 - eps].
template <typename T>
double bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  pred.require_same(target, "bce_loss");
  if (pred.empty()) throw ArgumentError("bce_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kBceClip, 1.0 - kBceClip);
    const double t = target[i];
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.size());
}

/// dL/dp of bce_loss, evaluated at the clipped prediction.
template <typename T>
Tensor<T> bce_grad(const Tensor<T>& pred, const Tensor<T>& target) {
  pred.require_same(target, "bce_grad");
  Tensor<T> g(pred.shape());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), kBceClip, 1.0 - kBceClip);
    g[i] = static_cast<T>((p - target[i]) / (p * (1.0 - p) * n));
  }
  return g;
}

template <typename T>
class Adam {
public:
  Adam(ParamStore<T>& params, const TrainConfig& c) : params_(params), cfg_(c) {
    for (auto& p : params_) {
      m_.emplace_back(p.trainable ? std::vector<double>(p.value.size(), 0.0) : std::vector<double>());
      v_.emplace_back(p.trainable ? std::vector<double>(p.value.size(), 0.0) : std::vector<double>());
    }
  }

  void step() {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.trainable) continue;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = b1 * m[i] + (1 - b1) * g;
        v[i] = b2 * v[i] + (1 - b2) * g * g;
        const double mh = m[i] / c1, vh = v[i] / c2;
        p.value[i] = static_cast<T>(p.value[i] - cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon));
      }
    }
  }

  std::int64_t steps() const { return t_; }

private:
  ParamStore<T>& params_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
};

inline GrayImage to_gray(const Tensor<float>& maps, int n) {
  const Shape& s = maps.shape();
  GrayImage g(s.w, s.h);
  const float* p = maps.plane(n, 0);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = std::clamp(static_cast<double>(p[i]), 0.0, 1.0);
  return g;
}

/// Sigmoid maps for each image (inference mode, no thresholding).
inline std::vector<GrayImage> predict(Model<float>& model, const std::vector<const Sample*>& images,
                                      int batch_size = 1) {
  std::vector<GrayImage> out;
  for (std::size_t i = 0; i < images.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(images.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<const Sample*> batch(images.begin() + static_cast<std::ptrdiff_t>(i),
                                     images.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor<float> maps = model.forward(stack_images(batch));
    for (int n = 0; n < maps.shape().n; ++n) out.push_back(to_gray(maps, n));
  }
  return out;
}

inline std::vector<const Sample*> pointers(const std::vector<Sample>& v) {
  std::vector<const Sample*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

/// Mean Tanimoto of the gray predictions against the binary masks.
inline double mean_tanimoto(Model<float>& model, const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw ArgumentError("mean_tanimoto over no samples");
  const auto preds = predict(model, samples);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) sum += tanimoto(preds[i], samples[i]->mask.to_gray());
  return sum / static_cast<double>(samples.size());
}

struct EpochLog {
  int epoch;
  double train_loss;
  std::optional<double> val_tanimoto;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;  // 0: no epoch run, or no validation set (final weights kept)
  std::optional<double> best_val_tanimoto;
  double seconds = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains in place.  With a validation set the weights of the best validation epoch are
/// restored at the end; otherwise the final weights are kept.
inline TrainResult train(Model<float>& model, const std::vector<const Sample*>& train_set,
                         const std::vector<const Sample*>& val_set, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  validate(cfg);
  if (train_set.empty()) throw TrainingError("training set is empty");
  for (const auto* s : train_set) {
    model.check_input(s->image.shape());
    if (s->mask.width != s->width() || s->mask.height != s->height())
      throw TrainingError("sample " + s->id + ": mask does not match image size");
  }
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  Adam<float> opt(model.params, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::optional<ParamStore<float>> best;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.shuffle)
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[detail::bounded(rng, i)]);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Sample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size)); ++i)
        batch.push_back(train_set[order[i]]);
      model.params.zero_grad();
      EvalContext<float> ctx(model.params, /*training=*/true, /*record=*/true);
      const auto out = model.arch.apply(ctx, ctx.input(stack_images(batch)));
      const Tensor<float> target = stack_masks(batch);
      const double loss = bce_loss(out.value(), target);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting with sample " +
                            batch.front()->id);
      const Tensor<float> seed = bce_grad(out.value(), target);
      backward(out, &seed);
      opt.step();
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochLog row{epoch, loss_sum / static_cast<double>(seen), std::nullopt};
    if (!val_set.empty()) {
      row.val_tanimoto = mean_tanimoto(model, val_set);
      if (!result.best_val_tanimoto || *row.val_tanimoto > *result.best_val_tanimoto) {
        result.best_val_tanimoto = row.val_tanimoto;
        result.best_epoch = epoch;
        best = model.params;
      }
    }
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  if (best) model.params = std::move(*best);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline std::string training_log_csv(const TrainResult& r) {
  std::string out = "epoch,train_loss,val_tanimoto\n";
  char buf[128];
  for (const auto& e : r.log) {
    if (e.val_tanimoto) std::snprintf(buf, sizeof buf, "%d,%.8f,%.8f\n", e.epoch, e.train_loss, *e.val_tanimoto);
    else std::snprintf(buf, sizeof buf, "%d,%.8f,\n", e.epoch, e.train_loss);
    out += buf;
  }
  return out;
}

}  // namespace cfpnet
