#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <cstring>
#include <random>
#include <set>

#include <unistd.h>

#include "cfpnet/data.hpp"
#include "cfpnet/image_io.hpp"

using namespace cfpnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cfpnet_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path / "images");
    fs::create_directories(path / "masks");
  }
  ~TempDir() { fs::remove_all(path); }
};

Image8 solid(int w, int h, int c, std::uint8_t v) {
  Image8 img;
  img.width = w;
  img.height = h;
  img.channels = c;
  img.pixels.assign(static_cast<std::size_t>(w) * h * c, v);
  return img;
}

// Left half set.
Image8 half_mask(int w, int h, std::uint8_t on = 255) {
  Image8 m = solid(w, h, 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w / 2; ++x) m.pixels[static_cast<std::size_t>(y) * w + x] = on;
  return m;
}

void write_pair(const fs::path& root, const std::string& id, int w, int h) {
  write_png((root / "images" / (id + ".png")).string(), solid(w, h, 3, 128));
  write_png((root / "masks" / (id + ".png")).string(), half_mask(w, h));
}

std::vector<std::string> ids(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("s" + std::to_string(i));
  return v;
}

}  // namespace

TEST(Ingest, ResizesEveryPair) {
  TempDir d;
  for (int i = 0; i < 30; ++i) write_pair(d.path, "p" + std::to_string(100 + i), 512, 512);
  const Dataset ds = load_dataset(d.path, {256, 256, ResizeMode::Stretch});
  ASSERT_EQ(ds.samples.size(), 30u);
  EXPECT_TRUE(ds.warnings.empty());
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.image.shape(), (Shape{1, 3, 256, 256}));
    EXPECT_EQ(s.mask.width, 256);
    EXPECT_EQ(s.mask.height, 256);
    EXPECT_EQ(s.mask.count(), 128u * 256u);
    EXPECT_NEAR(s.image[0], 128.0 / 255.0, 1e-6);
  }
  EXPECT_EQ(ds.samples.front().id, "p100");
  EXPECT_EQ(ds.samples.back().id, "p129");
}

TEST(Ingest, EmptyDirectoryWarns) {
  TempDir d;
  const Dataset ds = load_dataset(d.path, {});
  EXPECT_TRUE(ds.samples.empty());
  ASSERT_EQ(ds.warnings.size(), 1u);
  EXPECT_NE(ds.warnings[0].find("empty"), std::string::npos);
}

TEST(Ingest, MissingDirectoriesFail) {
  const fs::path p = fs::temp_directory_path() / "cfpnet_data_nonexistent";
  fs::remove_all(p);
  EXPECT_THROW(load_dataset(p, {}), DataError);
}

TEST(Ingest, NonBinaryMaskNamesFile) {
  TempDir d;
  write_pair(d.path, "good", 16, 16);
  write_png((d.path / "images" / "bad.png").string(), solid(16, 16, 3, 10));
  write_png((d.path / "masks" / "bad.png").string(), half_mask(16, 16, 127));
  try {
    load_dataset(d.path, {16, 16, ResizeMode::Stretch});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos) << e.what();
  }
}

TEST(Ingest, ZeroOneMasksAccepted) {
  TempDir d;
  write_png((d.path / "images" / "a.png").string(), solid(8, 4, 3, 0));
  write_png((d.path / "masks" / "a.png").string(), half_mask(8, 4, 1));
  const Dataset ds = load_dataset(d.path, {8, 4, ResizeMode::Stretch});
  EXPECT_EQ(ds.samples.at(0).mask.count(), 16u);
}

TEST(Ingest, OrphansAreListed) {
  TempDir d;
  write_pair(d.path, "a", 8, 8);
  write_png((d.path / "images" / "lonely.png").string(), solid(8, 8, 3, 0));
  write_png((d.path / "masks" / "stray.png").string(), half_mask(8, 8));
  try {
    load_dataset(d.path, {8, 8, ResizeMode::Stretch});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lonely.png"), std::string::npos) << msg;
    EXPECT_NE(msg.find("stray.png"), std::string::npos) << msg;
  }
}

TEST(Ingest, SizeMismatchFails) {
  TempDir d;
  write_png((d.path / "images" / "a.png").string(), solid(8, 8, 3, 0));
  write_png((d.path / "masks" / "a.png").string(), half_mask(8, 6));
  EXPECT_THROW(load_dataset(d.path, {8, 8, ResizeMode::Stretch}), DataError);
}

TEST(Ingest, GroupsFileIsRead) {
  TempDir d;
  for (const char* id : {"a", "b", "c"}) write_pair(d.path, id, 8, 8);
  std::ofstream(d.path / "groups.csv") << "filename,group\na.png,p1\nb,p2\nc.png,p1\n";
  const Dataset ds = load_dataset(d.path, {8, 8, ResizeMode::Stretch});
  ASSERT_EQ(ds.samples.size(), 3u);
  EXPECT_EQ(ds.samples[0].group, "p1");
  EXPECT_EQ(ds.samples[1].group, "p2");
  EXPECT_EQ(ds.samples[2].group, "p1");
}

TEST(Ingest, GroupsFileNeedsHeader) {
  TempDir d;
  write_pair(d.path, "a", 8, 8);
  std::ofstream(d.path / "groups.csv") << "a.png,p1\n";
  EXPECT_THROW(load_dataset(d.path, {8, 8, ResizeMode::Stretch}), DataError);
}

TEST(Ingest, WriteThenReadRoundTrip) {
  SyntheticSpec s;
  s.count = 4;
  s.width = 32;
  s.height = 16;
  s.groups = 2;
  const auto samples = generate_synthetic_dataset(s);
  TempDir d;
  write_dataset(d.path, samples);
  const Dataset ds = load_dataset(d.path, {32, 16, ResizeMode::Stretch});
  ASSERT_EQ(ds.samples.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(ds.samples[i].id, samples[i].id);
    EXPECT_EQ(ds.samples[i].group, samples[i].group);
    EXPECT_EQ(ds.samples[i].mask, samples[i].mask);
    for (std::size_t k = 0; k < samples[i].image.size(); ++k)
      ASSERT_NEAR(ds.samples[i].image[k], samples[i].image[k], 0.5 / 255.0 + 1e-6);
  }
}

TEST(Resize, LetterboxKeepsAspect) {
  const Image8 img = solid(100, 50, 3, 255);
  const Tensor<float> t = resize_image(img, {64, 64, ResizeMode::Letterbox});
  EXPECT_EQ(t.shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(t.at(0, 0, 0, 32), 0.0f);       // padding row
  EXPECT_NEAR(t.at(0, 0, 32, 32), 1.0f, 1e-6);
  EXPECT_EQ(t.at(0, 0, 63, 32), 0.0f);
  BinaryMask m(100, 50);
  std::fill(m.pixels.begin(), m.pixels.end(), 1);
  EXPECT_EQ(resize_mask(m, {64, 64, ResizeMode::Letterbox}).count(), 64u * 32u);
}

TEST(Resize, StretchNearestMask) {
  BinaryMask m(4, 2, {1, 1, 0, 0, 1, 1, 0, 0});
  const BinaryMask r = resize_mask(m, {8, 4, ResizeMode::Stretch});
  EXPECT_EQ(r.count(), 16u);
  EXPECT_EQ(r.pixels[3], 1);
  EXPECT_EQ(r.pixels[4], 0);
}

TEST(Resize, ModalityPolicies) {
  EXPECT_EQ(policy_for_modality("thermography").height, 128);
  EXPECT_EQ(policy_for_modality("endoscopy").height, 192);
  EXPECT_EQ(policy_for_modality("em").width, 256);
  EXPECT_THROW(policy_for_modality("xray"), ArgumentError);
}

TEST(KFold, EvenSplit) {
  const FoldPlan p = kfold_split(ids(30), 5, 1);
  ASSERT_EQ(p.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(p.validation(i).size(), 6u);
    EXPECT_EQ(p.training(i).size(), 24u);
  }
  check_partition(p, ids(30));
}

TEST(KFold, TwentyOverFive) {
  const FoldPlan p = kfold_split(ids(20), 5, 9);
  for (const auto& f : p.folds) EXPECT_EQ(f.size(), 4u);
}

TEST(KFold, UnevenSizesDifferByAtMostOne) {
  const FoldPlan p = kfold_split(ids(23), 5, 2);
  std::size_t lo = 100, hi = 0;
  for (const auto& f : p.folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  EXPECT_LE(hi - lo, 1u);
  check_partition(p, ids(23));
}

TEST(KFold, Deterministic) {
  EXPECT_EQ(kfold_split(ids(30), 5, 7).folds, kfold_split(ids(30), 5, 7).folds);
  EXPECT_NE(kfold_split(ids(30), 5, 7).folds, kfold_split(ids(30), 5, 8).folds);
  auto shuffled = ids(30);
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(kfold_split(shuffled, 5, 7).folds, kfold_split(ids(30), 5, 7).folds);
}

TEST(KFold, RejectsBadArguments) {
  EXPECT_THROW(kfold_split(ids(3), 5, 0), ArgumentError);
  EXPECT_THROW(kfold_split(ids(10), 1, 0), ArgumentError);
  EXPECT_THROW(kfold_split({"a", "a", "b"}, 2, 0), ArgumentError);
}

TEST(KFold, PartitionInvariantsOverSeeds) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const int n = 10 + static_cast<int>(seed) * 3, k = 2 + static_cast<int>(seed % 6);
    const FoldPlan p = kfold_split(ids(n), k, seed);
    check_partition(p, ids(n));
    std::size_t total = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      total += p.validation(i).size();
      const auto training = p.training(i);
      const std::set<std::string> tr(training.begin(), training.end());
      for (const auto& v : p.validation(i)) EXPECT_FALSE(tr.count(v));
      EXPECT_EQ(tr.size() + p.validation(i).size(), static_cast<std::size_t>(n));
    }
    EXPECT_EQ(total, static_cast<std::size_t>(n));
  }
}

TEST(KFold, CheckPartitionDetectsProblems) {
  FoldPlan p{2, {{"a", "b"}, {"b", "c"}}};
  EXPECT_THROW(check_partition(p, {"a", "b", "c"}), DataError);
  FoldPlan q{2, {{"a"}, {"b"}}};
  EXPECT_THROW(check_partition(q, {"a", "b", "c"}), DataError);
}

namespace {
std::vector<Sample> grouped_samples(const std::vector<std::pair<std::string, int>>& groups) {
  std::vector<Sample> out;
  int i = 0;
  for (const auto& [g, n] : groups)
    for (int j = 0; j < n; ++j) {
      Sample s;
      s.id = "x" + std::to_string(i++);
      s.group = g;
      out.push_back(s);
    }
  return out;
}
}  // namespace

TEST(GroupedSplit, OneFoldPerGroup) {
  std::vector<std::pair<std::string, int>> g;
  for (int i = 0; i < 30; ++i) g.push_back({"patient" + std::to_string(i), 15});
  const auto samples = grouped_samples(g);
  ASSERT_EQ(samples.size(), 450u);
  const FoldPlan p = grouped_split(samples);
  ASSERT_EQ(p.size(), 30u);
  for (const auto& f : p.folds) EXPECT_EQ(f.size(), 15u);
  std::vector<std::string> u;
  for (const auto& s : samples) u.push_back(s.id);
  check_partition(p, u);
  const auto names = fold_groups(samples, p);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), 30u);
}

TEST(GroupedSplit, UnequalGroups) {
  const auto samples = grouped_samples({{"b", 5}, {"a", 10}});
  const FoldPlan p = grouped_split(samples);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(fold_groups(samples, p), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(p.validation(0).size(), 10u);
  EXPECT_EQ(p.validation(1).size(), 5u);
}

TEST(GroupedSplit, Errors) {
  auto samples = grouped_samples({{"a", 3}, {"b", 3}});
  samples[4].group.clear();
  EXPECT_THROW(grouped_split(samples), DataError);
  EXPECT_THROW(grouped_split(grouped_samples({{"a", 4}})), DataError);
}

TEST(Synthetic, RatioWithinTolerance) {
  SyntheticSpec s;
  s.count = 30;
  s.width = 256;
  s.height = 256;
  s.object_ratio = 0.2;
  s.seed = 11;
  const auto v = generate_synthetic_dataset(s);
  ASSERT_EQ(v.size(), 30u);
  for (const auto& x : v) {
    const double r = static_cast<double>(x.mask.count()) / x.mask.size();
    EXPECT_GE(r, 0.18);
    EXPECT_LE(r, 0.22);
    EXPECT_EQ(x.image.shape(), (Shape{1, 3, 256, 256}));
    for (std::size_t i = 0; i < x.image.size(); ++i) {
      ASSERT_GE(x.image[i], 0.0f);
      ASSERT_LE(x.image[i], 1.0f);
    }
  }
}

TEST(Synthetic, BitIdenticalReruns) {
  SyntheticSpec s;
  s.count = 3;
  s.width = 48;
  s.height = 32;
  s.seed = 5;
  const auto a = generate_synthetic_dataset(s), b = generate_synthetic_dataset(s);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].mask, b[i].mask);
    EXPECT_EQ(std::memcmp(a[i].image.data(), b[i].image.data(), a[i].image.size() * sizeof(float)), 0);
  }
  s.seed = 6;
  EXPECT_NE(generate_synthetic_dataset(s)[0].mask, a[0].mask);
}

TEST(Synthetic, HalfCoverageSingleSample) {
  SyntheticSpec s;
  s.count = 1;
  s.object_ratio = 0.5;
  const auto v = generate_synthetic_dataset(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NEAR(static_cast<double>(v[0].mask.count()) / v[0].mask.size(), 0.5, 0.02);
}

TEST(Synthetic, CurveKindAndGroups) {
  SyntheticSpec s;
  s.count = 6;
  s.width = 128;
  s.height = 64;
  s.object_ratio = 0.15;
  s.kind = parse_synthetic_kind("curve");
  s.groups = 3;
  const auto v = generate_synthetic_dataset(s);
  for (const auto& x : v) EXPECT_NEAR(static_cast<double>(x.mask.count()) / x.mask.size(), 0.15, 0.02);
  EXPECT_EQ(v[0].group, "g00");
  EXPECT_EQ(v[4].group, "g01");
  EXPECT_THROW(parse_synthetic_kind("star"), ArgumentError);
}

TEST(Synthetic, InfeasibleRatioThrows) {
  SyntheticSpec s;
  s.object_ratio = 1.5;
  EXPECT_ANY_THROW(generate_synthetic_dataset(s));
  s.object_ratio = 0.0;
  EXPECT_ANY_THROW(generate_synthetic_dataset(s));
}

TEST(Batching, StacksInOrder) {
  SyntheticSpec s;
  s.count = 3;
  s.width = 16;
  s.height = 8;
  const auto v = generate_synthetic_dataset(s);
  const auto imgs = stack_images({&v[2], &v[0]});
  const auto masks = stack_masks({&v[2], &v[0]});
  EXPECT_EQ(imgs.shape(), (Shape{2, 3, 8, 16}));
  EXPECT_EQ(masks.shape(), (Shape{2, 1, 8, 16}));
  EXPECT_EQ(imgs.at(0, 1, 3, 4), v[2].image.at(0, 1, 3, 4));
  EXPECT_EQ(imgs.at(1, 2, 5, 9), v[0].image.at(0, 2, 5, 9));
  EXPECT_EQ(masks.at(1, 0, 2, 2), static_cast<float>(v[0].mask.pixels[2 * 16 + 2]));
}
