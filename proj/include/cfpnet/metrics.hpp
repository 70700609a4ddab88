#pragma once

// Binary and gray-level comparison metrics: Jaccard (with Otsu binarization),
// mean absolute error and Tanimoto similarity, plus the metric-stability sweep.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cfpnet/error.hpp"
#include "cfpnet/shapes.hpp"

namespace cfpnet {

/// Gray image with pixel values in [0, 1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  GrayImage(int w, int h, std::vector<double> px) : width(w), height(h), pixels(std::move(px)) {
    if (pixels.size() != static_cast<std::size_t>(w) * h) throw ArgumentError("gray image size mismatch");
  }

  std::size_t size() const { return pixels.size(); }
  double& operator()(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// 0/1 mask, row-major.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}
  BinaryMask(int w, int h, std::vector<std::uint8_t> px) : width(w), height(h), pixels(std::move(px)) {
    if (pixels.size() != static_cast<std::size_t>(w) * h) throw ArgumentError("mask size mismatch");
    for (auto p : pixels)
      if (p > 1) throw ArgumentError("mask values must be 0 or 1");
  }

  std::size_t size() const { return pixels.size(); }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto p : pixels) n += p;
    return n;
  }
  bool operator==(const BinaryMask&) const = default;

  GrayImage to_gray() const {
    GrayImage g(width, height);
    for (std::size_t i = 0; i < pixels.size(); ++i) g.pixels[i] = pixels[i];
    return g;
  }
};

namespace detail {
template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (a.width != b.width || a.height != b.height)
    throw ArgumentError(std::string(what) + ": shape mismatch " + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

inline void require_unit_range(const GrayImage& g, const char* what) {
  for (double v : g.pixels)
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(std::string(what) + ": pixel values must lie in [0, 1]");
}
}  // namespace detail

/// |A n B| / |A u B|; two empty masks compare as 1.
inline double jaccard(const BinaryMask& a, const BinaryMask& b) {
  detail::require_same_dims(a, b, "jaccard");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    inter += a.pixels[i] & b.pixels[i];
    uni += a.pixels[i] | b.pixels[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Sum of products over sum of (a^2 + b^2 - ab); two all-zero images compare as 1.
inline double tanimoto(const GrayImage& a, const GrayImage& b) {
  detail::require_same_dims(a, b, "tanimoto");
  detail::require_unit_range(a, "tanimoto");
  detail::require_unit_range(b, "tanimoto");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double x = a.pixels[i], y = b.pixels[i];
    num += x * y;
    den += (x - y) * (x - y) + x * y;  // x^2 + y^2 - xy, written symmetric in (x, y)
  }
  if (den == 0.0) return 1.0;
  return num / den;
}

/// Summed absolute difference in 8-bit units over W*L*2^8.
inline double mae(const GrayImage& a, const GrayImage& b) {
  detail::require_same_dims(a, b, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) sum += std::abs(a.pixels[i] - b.pixels[i]);
  return sum * 255.0 / (static_cast<double>(a.width) * a.height * 256.0);
}

using Histogram = std::array<std::uint64_t, 256>;

/// 8-bit level of a [0,1] value.
inline int quantize_level(double v) {
  const long q = std::lround(v * 255.0);
  return static_cast<int>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

inline Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (double v : img.pixels) ++h[static_cast<std::size_t>(quantize_level(v))];
  return h;
}

/// Between-class variance of splitting the histogram into levels <= t and > t.
inline double between_class_variance(const Histogram& h, int t) {
  std::uint64_t n0 = 0, n = 0;
  std::uint64_t s0 = 0, s = 0;
  for (int i = 0; i < 256; ++i) {
    n += h[i];
    s += h[i] * static_cast<std::uint64_t>(i);
    if (i <= t) {
      n0 += h[i];
      s0 += h[i] * static_cast<std::uint64_t>(i);
    }
  }
  const std::uint64_t n1 = n - n0;
  if (n0 == 0 || n1 == 0) return 0.0;
  const double w0 = static_cast<double>(n0) / n, w1 = static_cast<double>(n1) / n;
  const double mu0 = static_cast<double>(s0) / n0, mu1 = static_cast<double>(s - s0) / n1;
  return w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
}

/// Otsu level: the smallest t in [0, 255] maximizing between-class variance; -1 when the
/// histogram occupies a single level (no split exists).
inline int otsu_level(const Histogram& h) {
  std::uint64_t n = 0, s = 0;
  for (int i = 0; i < 256; ++i) {
    n += h[i];
    s += h[i] * static_cast<std::uint64_t>(i);
  }
  std::uint64_t n0 = 0, s0 = 0;
  double best = 0.0;
  int level = -1;
  for (int t = 0; t < 255; ++t) {
    n0 += h[t];
    s0 += h[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double w0 = static_cast<double>(n0) / n, w1 = static_cast<double>(n1) / n;
    const double mu0 = static_cast<double>(s0) / n0, mu1 = static_cast<double>(s - s0) / n1;
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best) {
      best = var;
      level = t;
    }
  }
  return level;
}

/// Binarizes at the Otsu level (> level -> 1).  A constant image yields an all-zero mask.
inline BinaryMask otsu_threshold(const GrayImage& img) {
  if (img.pixels.empty()) throw ArgumentError("otsu_threshold: empty image");
  const int level = otsu_level(histogram(img));
  BinaryMask m(img.width, img.height);
  if (level < 0) return m;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) m.pixels[i] = quantize_level(img.pixels[i]) > level ? 1 : 0;
  return m;
}

/// Jaccard of the Otsu-binarized prediction against a reference mask.
inline double jaccard_otsu(const GrayImage& prediction, const BinaryMask& truth) {
  return jaccard(otsu_threshold(prediction), truth);
}

struct MetricSet {
  double tanimoto = 0;
  double jaccard = 0;  // after Otsu binarization of both inputs
  double mae = 0;
};

/// All three metrics for a pair of gray images.
inline MetricSet compare(const GrayImage& a, const GrayImage& b) {
  return {tanimoto(a, b), jaccard(otsu_threshold(a), otsu_threshold(b)), mae(a, b)};
}

// ---- stability sweep ----

/// Fixed corruption of a ground-truth mask: foreground -> gain, background -> offset.
struct Perturbation {
  double gain = 0.8;
  double offset = 0.05;
};

struct StabilitySpec {
  int base_width = 40;
  int base_height = 20;
  std::vector<int> scales{1, 2, 4, 8, 10};
  std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5};
  Perturbation perturbation;
};

struct StabilityRow {
  int width;
  int height;
  double target_ratio;
  double actual_ratio;
  std::string metric;  // "tanimoto", "jaccard_otsu", "one_minus_mae"
  double value;
};

inline GrayImage perturb(const BinaryMask& truth, const Perturbation& p) {
  GrayImage g(truth.width, truth.height);
  for (std::size_t i = 0; i < truth.pixels.size(); ++i) g.pixels[i] = truth.pixels[i] ? p.gain : p.offset;
  return g;
}

/// Sweeps image size (integer replication of one base pattern) and object ratio.
inline std::vector<StabilityRow> stability_experiment(const StabilitySpec& spec) {
  if (spec.scales.empty() || spec.ratios.empty()) throw ArgumentError("stability sweep is empty");
  for (int s : spec.scales)
    if (s <= 0) throw ArgumentError("scale factors must be positive");
  std::vector<StabilityRow> rows;
  for (double ratio : spec.ratios) {
    const shapes::Raster base = shapes::centred_ellipse(spec.base_width, spec.base_height, ratio);
    for (int scale : spec.scales) {
      const shapes::Raster r = shapes::replicate(base, scale);
      BinaryMask truth(r.width, r.height, r.pixels);
      const GrayImage pred = perturb(truth, spec.perturbation);
      const GrayImage gt = truth.to_gray();
      const double actual = r.fraction();
      rows.push_back({r.width, r.height, ratio, actual, "tanimoto", tanimoto(gt, pred)});
      rows.push_back({r.width, r.height, ratio, actual, "jaccard_otsu", jaccard_otsu(pred, truth)});
      rows.push_back({r.width, r.height, ratio, actual, "one_minus_mae", 1.0 - mae(gt, pred)});
    }
  }
  return rows;
}

/// max - min of one metric over the rows selected by pred.
template <typename Pred>
double metric_spread(const std::vector<StabilityRow>& rows, const std::string& metric, Pred pred) {
  double lo = 1e300, hi = -1e300;
  for (const auto& r : rows) {
    if (r.metric != metric || !pred(r)) continue;
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
  }
  return hi >= lo ? hi - lo : 0.0;
}

}  // namespace cfpnet
