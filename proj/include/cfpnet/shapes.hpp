#pragma once

// Rasterized foreground shapes with a controlled area fraction.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cfpnet/error.hpp"

namespace cfpnet::shapes {

/// Row-major 0/1 raster.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t count() const {
    std::size_t n = 0;
    for (auto p : pixels) n += p;
    return n;
  }
  double fraction() const { return pixels.empty() ? 0.0 : static_cast<double>(count()) / pixels.size(); }
};

/// Ellipse centred at (cx, cy) with semi-axes (ax, ay), clipped to the frame.
inline Raster ellipse(int width, int height, double cx, double cy, double ax, double ay) {
  Raster r{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - cx) / ax;
      const double dy = (y + 0.5 - cy) / ay;
      r.pixels[static_cast<std::size_t>(y) * width + x] = (dx * dx + dy * dy <= 1.0) ? 1 : 0;
    }
  }
  return r;
}

/// Sinusoidal band |y - curve(x)| <= half_thickness; curve = cy + amp*sin(2*pi*freq*x/width + phase).
inline Raster band(int width, int height, double cy, double amplitude, double frequency, double phase,
                   double half_thickness) {
  Raster r{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double c = cy + amplitude * std::sin(2.0 * std::numbers::pi * frequency * (x + 0.5) / width + phase);
      r.pixels[static_cast<std::size_t>(y) * width + x] = std::abs(y + 0.5 - c) <= half_thickness ? 1 : 0;
    }
  }
  return r;
}

/// Bisects a monotone size parameter s in [lo, hi] so that make(s) covers as close to
/// target pixels as possible.
template <typename Make>
Raster fit_area(Make make, double lo, double hi, double target) {
  Raster best = make(hi);
  double best_err = std::abs(static_cast<double>(best.count()) - target);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    Raster r = make(mid);
    const double err = std::abs(static_cast<double>(r.count()) - target);
    if (err < best_err) {
      best = r;
      best_err = err;
    }
    if (static_cast<double>(r.count()) < target) lo = mid;
    else hi = mid;
  }
  return best;
}

inline void check_ratio(int width, int height, double ratio) {
  if (width <= 0 || height <= 0) throw ArgumentError("shape frame must be non-empty");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("object ratio must lie in (0, 1)");
  if (ratio * width * height < 1.0)
    throw ArgumentError("object ratio " + std::to_string(ratio) + " is below one pixel for " + std::to_string(width) +
                        "x" + std::to_string(height));
}

/// Centred ellipse with the frame's aspect ratio covering about ratio of the frame.
inline Raster centred_ellipse(int width, int height, double ratio) {
  check_ratio(width, height, ratio);
  if (ratio > std::numbers::pi / 4.0 - 0.01)
    throw ArgumentError("object ratio " + std::to_string(ratio) + " does not fit as an inscribed ellipse");
  const double target = ratio * width * height;
  return fit_area([&](double s) { return ellipse(width, height, width / 2.0, height / 2.0, s * width / 2.0, s * height / 2.0); },
                  0.0, 1.0, target);
}

/// Nearest-neighbour replication by an integer factor.
inline Raster replicate(const Raster& r, int factor) {
  Raster out{r.width * factor, r.height * factor, {}};
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.pixels[static_cast<std::size_t>(y) * out.width + x] =
          r.pixels[static_cast<std::size_t>(y / factor) * r.width + x / factor];
  return out;
}

}  // namespace cfpnet::shapes
