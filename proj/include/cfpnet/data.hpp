#pragma once

// Dataset ingestion, resizing, cross-validation splits and synthetic data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfpnet/error.hpp"
#include "cfpnet/image_io.hpp"
#include "cfpnet/metrics.hpp"
#include "cfpnet/shapes.hpp"
#include "cfpnet/tensor.hpp"

namespace cfpnet {

/// One image/mask pair.  image is 1 x 3 x H x W in [0, 1].
struct Sample {
  std::string id;
  std::string group;
  Tensor<float> image;
  BinaryMask mask;

  int height() const { return image.shape().h; }
  int width() const { return image.shape().w; }
};

enum class ResizeMode { Stretch, Letterbox };

struct ResizePolicy {
  int width = 256;
  int height = 256;
  ResizeMode mode = ResizeMode::Stretch;
};

inline ResizePolicy policy_for_modality(const std::string& modality) {
  if (modality == "thermography") return {256, 128, ResizeMode::Stretch};
  if (modality == "em" || modality == "retina") return {256, 256, ResizeMode::Stretch};
  if (modality == "endoscopy" || modality == "dermoscopy") return {256, 192, ResizeMode::Stretch};
  throw ArgumentError("unknown modality '" + modality + "'");
}

// ---- resizing ----

namespace detail {
/// Placement of a src_w x src_h image inside a dst_w x dst_h frame.
struct Placement {
  int x0, y0, w, h;
};

inline Placement place(int src_w, int src_h, const ResizePolicy& p) {
  if (p.mode == ResizeMode::Stretch) return {0, 0, p.width, p.height};
  const double s = std::min(static_cast<double>(p.width) / src_w, static_cast<double>(p.height) / src_h);
  const int w = std::max(1, static_cast<int>(std::lround(src_w * s)));
  const int h = std::max(1, static_cast<int>(std::lround(src_h * s)));
  return {(p.width - w) / 2, (p.height - h) / 2, w, h};
}

inline double source_coord(int dst, int dst_len, int src_len) {
  return (dst + 0.5) * static_cast<double>(src_len) / dst_len - 0.5;
}
}  // namespace detail

/// Bilinear (half-pixel centres) resize of an 8-bit image to a float 1 x C x H x W tensor in [0, 1].
inline Tensor<float> resize_image(const Image8& src, const ResizePolicy& p) {
  const int c = src.channels;
  Tensor<float> out(Shape{1, c, p.height, p.width});
  const auto pl = detail::place(src.width, src.height, p);
  for (int y = 0; y < pl.h; ++y) {
    const double sy = std::clamp(detail::source_coord(y, pl.h, src.height), 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < pl.w; ++x) {
      const double sx = std::clamp(detail::source_coord(x, pl.w, src.width), 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double v = (1 - fy) * ((1 - fx) * src.at(x0, y0, ch) + fx * src.at(x1, y0, ch)) +
                         fy * ((1 - fx) * src.at(x0, y1, ch) + fx * src.at(x1, y1, ch));
        out.at(0, ch, pl.y0 + y, pl.x0 + x) = static_cast<float>(v / 255.0);
      }
    }
  }
  return out;
}

/// Nearest-neighbour resize of a 0/1 mask.
inline BinaryMask resize_mask(const BinaryMask& src, const ResizePolicy& p) {
  BinaryMask out(p.width, p.height);
  const auto pl = detail::place(src.width, src.height, p);
  for (int y = 0; y < pl.h; ++y) {
    const int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / pl.h));
    for (int x = 0; x < pl.w; ++x) {
      const int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / pl.w));
      out.pixels[static_cast<std::size_t>(pl.y0 + y) * p.width + pl.x0 + x] =
          src.pixels[static_cast<std::size_t>(sy) * src.width + sx];
    }
  }
  return out;
}

/// 8-bit mask to 0/1.  Accepts {0, 255} or {0, 1} encodings; anything else is an error.
inline BinaryMask binarize_mask(const Image8& m, const std::string& what) {
  BinaryMask out(m.width, m.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const auto v = m.pixels[i];
    if (v != 0 && v != 1 && v != 255)
      throw DataError("mask " + what + " is not binary (found value " + std::to_string(v) + ")");
    out.pixels[i] = v ? 1 : 0;
  }
  return out;
}

// ---- ingestion ----

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
};

namespace detail {
inline std::map<std::string, std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") out[e.path().stem().string()] = e.path();
  }
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// groups.csv: header "filename,group"; keys accepted with or without extension.
inline std::map<std::string, std::string> read_groups(const std::filesystem::path& file) {
  std::map<std::string, std::string> out;
  std::ifstream in(file);
  if (!in) throw DataError("cannot read " + file.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "filename,group")
    throw DataError(file.string() + ": expected header 'filename,group'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(file.string() + ":" + std::to_string(lineno) + ": missing comma");
    const std::string name = trim(line.substr(0, comma));
    out[std::filesystem::path(name).stem().string()] = trim(line.substr(comma + 1));
  }
  return out;
}
}  // namespace detail

/// Reads root/images/*.png and root/masks/*.png (matched by file stem), resized per policy.
/// Samples are returned sorted by id.
inline Dataset load_dataset(const std::filesystem::path& root, const ResizePolicy& policy) {
  namespace fs = std::filesystem;
  if (policy.width <= 0 || policy.height <= 0) throw ArgumentError("resize target must be positive");
  const fs::path img_dir = root / "images", mask_dir = root / "masks";
  if (!fs::is_directory(img_dir) || !fs::is_directory(mask_dir))
    throw DataError("dataset " + root.string() + " must contain images/ and masks/ directories");
  const auto images = detail::list_pngs(img_dir);
  const auto masks = detail::list_pngs(mask_dir);

  std::vector<std::string> orphans;
  for (const auto& [id, p] : images)
    if (!masks.count(id)) orphans.push_back("image without mask: " + p.filename().string());
  for (const auto& [id, p] : masks)
    if (!images.count(id)) orphans.push_back("mask without image: " + p.filename().string());
  if (!orphans.empty()) {
    std::string msg = "unmatched files in " + root.string() + ":";
    for (const auto& o : orphans) msg += " [" + o + "]";
    throw DataError(msg);
  }

  Dataset ds;
  if (images.empty()) {
    ds.warnings.push_back("dataset " + root.string() + " is empty");
    return ds;
  }
  std::map<std::string, std::string> groups;
  if (fs::exists(root / "groups.csv")) groups = detail::read_groups(root / "groups.csv");

  for (const auto& [id, path] : images) {  // std::map iterates in id order
    const Image8 img = read_png(path.string(), 3);
    const Image8 m8 = read_png(masks.at(id).string(), 1);
    if (img.width != m8.width || img.height != m8.height)
      throw DataError("image and mask sizes differ for " + id);
    Sample s;
    s.id = id;
    if (auto it = groups.find(id); it != groups.end()) s.group = it->second;
    s.image = resize_image(img, policy);
    s.mask = resize_mask(binarize_mask(m8, masks.at(id).filename().string()), policy);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Writes samples as root/images/<id>.png, root/masks/<id>.png and, when any sample has a
/// group, root/groups.csv.
inline void write_dataset(const std::filesystem::path& root, const std::vector<Sample>& samples) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  bool any_group = false;
  for (const auto& s : samples) {
    const int h = s.height(), w = s.width(), c = s.image.shape().c;
    Image8 img{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          const float v = s.image.at(0, std::min(ch, c - 1), y, x);
          img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + ch] =
              static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
    write_png((root / "images" / (s.id + ".png")).string(), img);
    Image8 m{s.mask.width, s.mask.height, 1, std::vector<std::uint8_t>(s.mask.size())};
    for (std::size_t i = 0; i < s.mask.size(); ++i) m.pixels[i] = s.mask.pixels[i] ? 255 : 0;
    write_png((root / "masks" / (s.id + ".png")).string(), m);
    any_group = any_group || !s.group.empty();
  }
  if (any_group) {
    std::ofstream out(root / "groups.csv");
    out << "filename,group\n";
    for (const auto& s : samples) out << s.id << ".png," << s.group << "\n";
  }
}

// ---- cross-validation plans ----

/// k disjoint validation folds covering all ids.  Fold i trains on the other k-1 folds.
struct FoldPlan {
  int k = 0;
  std::vector<std::vector<std::string>> folds;

  const std::vector<std::string>& validation(std::size_t i) const { return folds.at(i); }
  std::vector<std::string> training(std::size_t i) const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < folds.size(); ++j)
      if (j != i) out.insert(out.end(), folds[j].begin(), folds[j].end());
    std::sort(out.begin(), out.end());
    return out;
  }
  std::size_t size() const { return folds.size(); }
};

/// Throws if the folds overlap or do not cover exactly the given universe.
inline void check_partition(const FoldPlan& plan, std::vector<std::string> universe) {
  std::set<std::string> seen;
  for (const auto& f : plan.folds)
    for (const auto& id : f)
      if (!seen.insert(id).second) throw DataError("fold plan assigns '" + id + "' to more than one fold");
  std::sort(universe.begin(), universe.end());
  universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  if (!std::equal(seen.begin(), seen.end(), universe.begin(), universe.end()))
    throw DataError("fold plan does not cover the id universe exactly");
}

namespace detail {
/// Unbiased integer in [0, n) from a 64-bit engine (rejection sampling).
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % n;
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
}  // namespace detail

/// Random k-fold partition; fold sizes differ by at most one.  Deterministic in (ids as a set, seed).
inline FoldPlan kfold_split(std::vector<std::string> ids, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("k must be at least 2, got " + std::to_string(k));
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ArgumentError("kfold_split: duplicate ids");
  if (static_cast<std::size_t>(k) > ids.size())
    throw ArgumentError("k = " + std::to_string(k) + " exceeds the number of ids (" + std::to_string(ids.size()) + ")");
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[detail::bounded(rng, i)]);
  FoldPlan plan{k, std::vector<std::vector<std::string>>(static_cast<std::size_t>(k))};
  for (std::size_t i = 0; i < ids.size(); ++i) plan.folds[i % k].push_back(ids[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

/// One fold per group label, folds ordered by group name.
inline FoldPlan grouped_split(const std::vector<Sample>& samples) {
  std::map<std::string, std::vector<std::string>> by_group;
  for (const auto& s : samples) {
    if (s.group.empty()) throw DataError("grouped split: sample '" + s.id + "' has no group label");
    by_group[s.group].push_back(s.id);
  }
  if (by_group.size() < 2) throw DataError("grouped split needs at least 2 groups, got " + std::to_string(by_group.size()));
  FoldPlan plan;
  plan.k = static_cast<int>(by_group.size());
  for (auto& [g, ids] : by_group) {
    std::sort(ids.begin(), ids.end());
    plan.folds.push_back(std::move(ids));
  }
  return plan;
}

/// Group label of each fold of a grouped plan (same order as grouped_split).
inline std::vector<std::string> fold_groups(const std::vector<Sample>& samples, const FoldPlan& plan) {
  std::map<std::string, std::string> group_of;
  for (const auto& s : samples) group_of[s.id] = s.group;
  std::vector<std::string> out;
  for (const auto& f : plan.folds) out.push_back(f.empty() ? std::string() : group_of[f.front()]);
  return out;
}

// ---- synthetic data ----

enum class SyntheticKind { Disk, Curve };

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "disk") return SyntheticKind::Disk;
  if (s == "curve") return SyntheticKind::Curve;
  throw ArgumentError("unknown synthetic kind '" + s + "' (expected disk or curve)");
}

struct SyntheticSpec {
  int count = 1;
  int width = 256;
  int height = 256;
  double object_ratio = 0.2;
  std::uint64_t seed = 0;
  SyntheticKind kind = SyntheticKind::Disk;
  int groups = 0;            // >0 assigns labels g00, g01, ... round-robin
  double tolerance = 0.02;   // allowed |mask fraction - object_ratio|
  double noise = 0.05;       // std of additive pixel noise
};

namespace detail {
inline double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline shapes::Raster synthetic_mask(const SyntheticSpec& s, std::mt19937_64& rng) {
  const double w = s.width, h = s.height;
  const double target = s.object_ratio * w * h;
  if (s.kind == SyntheticKind::Disk) {
    const double aspect = 0.75 + 0.5 * uniform01(rng);  // ax / ay relative to frame aspect
    const double area = target;
    const double ay = std::sqrt(area / (std::numbers::pi * aspect * w / h));
    const double ax = ay * aspect * w / h;
    const double cx = w / 2 + (uniform01(rng) - 0.5) * std::max(0.0, w - 2 * ax);
    const double cy = h / 2 + (uniform01(rng) - 0.5) * std::max(0.0, h - 2 * ay);
    return shapes::fit_area(
        [&](double k) { return shapes::ellipse(s.width, s.height, cx, cy, k * ax, k * ay); }, 0.0, 4.0, target);
  }
  const double amp = (0.05 + 0.15 * uniform01(rng)) * h;
  const double freq = 0.5 + 2.0 * uniform01(rng);
  const double phase = 2.0 * std::numbers::pi * uniform01(rng);
  const double cy = h / 2 + (uniform01(rng) - 0.5) * 0.2 * h;
  return shapes::fit_area([&](double t) { return shapes::band(s.width, s.height, cy, amp, freq, phase, t); }, 0.0, h,
                          target);
}
}  // namespace detail

/// Deterministic foreground/background image-mask pairs.  The foreground is a
/// brighter, reddish region over a darker, gently shaded background, plus noise.
inline std::vector<Sample> generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.count < 1) throw ArgumentError("synthetic dataset size must be >= 1");
  shapes::check_ratio(spec.width, spec.height, spec.object_ratio);
  std::mt19937_64 rng(spec.seed);
  std::vector<Sample> out;
  const int digits = std::max(3, static_cast<int>(std::to_string(spec.count).size()));
  for (int i = 0; i < spec.count; ++i) {
    const shapes::Raster r = detail::synthetic_mask(spec, rng);
    if (std::abs(r.fraction() - spec.object_ratio) > spec.tolerance)
      throw ArgumentError("object ratio " + std::to_string(spec.object_ratio) + " is infeasible at " +
                          std::to_string(spec.width) + "x" + std::to_string(spec.height) + " (best fit " +
                          std::to_string(r.fraction()) + ")");
    Sample s;
    std::ostringstream id;
    id << "synth_" << std::string(digits - std::to_string(i).size(), '0') << i;
    s.id = id.str();
    if (spec.groups > 0) {
      const int g = i % spec.groups;
      s.group = std::string("g") + (g < 10 ? "0" : "") + std::to_string(g);
    }
    s.mask = BinaryMask(r.width, r.height, r.pixels);
    s.image = Tensor<float>(Shape{1, 3, spec.height, spec.width});
    const double fg[3] = {0.75 + 0.1 * detail::uniform01(rng), 0.45, 0.35};
    const double bg[3] = {0.25, 0.25 + 0.1 * detail::uniform01(rng), 0.3};
    const double shade = 0.1 * detail::uniform01(rng);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const bool on = s.mask.pixels[static_cast<std::size_t>(y) * spec.width + x];
        const double grad = shade * (static_cast<double>(x) / spec.width - 0.5);
        for (int c = 0; c < 3; ++c) {
          const double v = (on ? fg[c] : bg[c]) + grad + spec.noise * detail::gaussian(rng);
          s.image.at(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Stacks samples into one N x 3 x H x W batch.
inline Tensor<float> stack_images(const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw ArgumentError("empty batch");
  const Shape s0 = batch.front()->image.shape();
  Tensor<float> out(Shape{static_cast<int>(batch.size()), s0.c, s0.h, s0.w});
  const std::size_t per = s0.numel();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->image.shape() != s0) throw ArgumentError("batch samples differ in size");
    std::copy(batch[i]->image.data(), batch[i]->image.data() + per, out.data() + i * per);
  }
  return out;
}

/// Masks of a batch as an N x 1 x H x W target tensor.
inline Tensor<float> stack_masks(const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw ArgumentError("empty batch");
  const auto& m0 = batch.front()->mask;
  Tensor<float> out(Shape{static_cast<int>(batch.size()), 1, m0.height, m0.width});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& m = batch[i]->mask;
    if (m.width != m0.width || m.height != m0.height) throw ArgumentError("batch masks differ in size");
    for (std::size_t p = 0; p < m.size(); ++p) out.data()[i * m.size() + p] = m.pixels[p];
  }
  return out;
}

}  // namespace cfpnet
