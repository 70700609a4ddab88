#pragma once

// Slow reference implementations used to cross-check the metrics.

#include <set>

#include "cfpnet/metrics.hpp"

namespace cfpnet::testing {

// Set-based Jaccard on pixel indices.
inline double set_jaccard(const BinaryMask& a, const BinaryMask& b) {
  std::set<std::size_t> sa, sb, inter, uni;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.pixels[i]) sa.insert(i);
    if (b.pixels[i]) sb.insert(i);
  }
  for (auto i : sa) {
    uni.insert(i);
    if (sb.count(i)) inter.insert(i);
  }
  for (auto i : sb) uni.insert(i);
  return uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

// Exhaustive Otsu via sigma_total^2 - sigma_within^2 with two-pass class moments.
inline int brute_otsu(const Histogram& h) {
  double n = 0;
  for (auto c : h) n += static_cast<double>(c);
  double best = -1;
  int level = -1;
  for (int t = 0; t < 255; ++t) {
    double n0 = 0, n1 = 0, m0 = 0, m1 = 0;
    for (int i = 0; i < 256; ++i) (i <= t ? n0 : n1) += static_cast<double>(h[i]);
    if (n0 == 0 || n1 == 0) continue;
    for (int i = 0; i < 256; ++i) (i <= t ? m0 : m1) += static_cast<double>(h[i]) * i;
    m0 /= n0;
    m1 /= n1;
    double v0 = 0, v1 = 0, mt = 0, vt = 0;
    for (int i = 0; i < 256; ++i) {
      (i <= t ? v0 : v1) += static_cast<double>(h[i]) * (i - (i <= t ? m0 : m1)) * (i - (i <= t ? m0 : m1));
      mt += static_cast<double>(h[i]) * i;
    }
    mt /= n;
    for (int i = 0; i < 256; ++i) vt += static_cast<double>(h[i]) * (i - mt) * (i - mt);
    const double between = (vt - v0 - v1) / n;
    if (between > best * (1 + 1e-12) + 1e-12) {
      best = between;
      level = t;
    }
  }
  return level;
}

}  // namespace cfpnet::testing
