#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfpnet/image_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("cfpnet_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  Result run(const std::string& args) {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string(CFPNET_CLI) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }
};

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, InspectReportsParameterCount) {
  const Result r = run("inspect --model cfpnet-m --input 256x128 --out " + p("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("685505"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1001324544"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(p("o/layer_audit.csv")));
  const json cfg = json::parse(slurp(p("o/effective_config.json")));
  EXPECT_EQ(cfg.dump().find("256x128") != std::string::npos, true) << cfg.dump();
  const json cx = json::parse(slurp(p("o/complexity.json")));
  EXPECT_EQ(cx.at("parameters"), 685505);
}

TEST_F(Cli, InspectUNet) {
  const Result r = run("inspect --model unet --input 256x128 --out " + p("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("31031745"), std::string::npos) << r.out;
}

TEST_F(Cli, MetricsOfIdenticalImages) {
  cfpnet::Image8 img{16, 8, 1, std::vector<std::uint8_t>(128)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 2);
  cfpnet::write_png(p("a.png"), img);
  const Result r = run("metrics " + p("a.png") + " " + p("a.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("jaccard").get<double>(), 1.0);
  EXPECT_EQ(j.at("tanimoto").get<double>(), 1.0);
  EXPECT_EQ(j.at("mae").get<double>(), 0.0);
}

TEST_F(Cli, MetricsSizeMismatchFails) {
  cfpnet::write_png(p("a.png"), {4, 4, 1, std::vector<std::uint8_t>(16, 0)});
  cfpnet::write_png(p("b.png"), {4, 2, 1, std::vector<std::uint8_t>(8, 0)});
  const Result r = run("metrics " + p("a.png") + " " + p("b.png"));
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(lines(r.err), 1) << r.err;
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
}

TEST_F(Cli, SynthThenCrossValidate) {
  Result r = run("synth --n 30 --size 32x32 --groups 3 --seed 4 --out " + p("data"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::distance(fs::directory_iterator(p("data/images")), fs::directory_iterator{}), 30);
  EXPECT_TRUE(fs::exists(p("data/groups.csv")));

  r = run("cross-validate --dataset " + p("data") + " --input 32x32 --k 5 --epochs 1 --batch 8 --out " + p("cv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mean"), std::string::npos);
  const json j = json::parse(slurp(p("cv/crossval.json")));
  EXPECT_EQ(j.at("fold_tanimoto_percent").size(), 5u);
  EXPECT_EQ(lines(slurp(p("cv/crossval.csv"))), 8);
  for (int f = 1; f <= 5; ++f) EXPECT_TRUE(fs::exists(p("cv/fold_" + std::to_string(f) + "_log.csv")));
  EXPECT_TRUE(fs::exists(p("cv/effective_config.json")));

  r = run("cross-validate --dataset " + p("data") + " --input 32x32 --grouped --epochs 1 --batch 8 --out " + p("g"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(p("g/groups.csv"))), 4);
}

TEST_F(Cli, TrainPredictBenchmark) {
  ASSERT_EQ(run("synth --n 4 --size 32x32 --out " + p("data")).code, 0);
  Result r = run("train --dataset " + p("data") + " --input 32x32 --epochs 2 --out " + p("t"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(p("t/train_log.csv"))), 3);
  ASSERT_TRUE(fs::exists(p("t/model.ckpt")));

  r = run("predict --checkpoint " + p("t/model.ckpt") + " --dataset " + p("data") + " --out " + p("pred"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::distance(fs::directory_iterator(p("pred")), fs::directory_iterator{}) >= 4, true);

  r = run("benchmark --checkpoint " + p("t/model.ckpt") + " --input 32x32 --frames 5 --warmup 1 --out " + p("b"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json s = json::parse(slurp(p("b/speed.json")));
  EXPECT_EQ(s.at("frames"), 5);
}

TEST_F(Cli, ConfigFileAndOverride) {
  std::ofstream(p("c.json")) << R"({"train": {"epochs": 7, "lr": 0.01}, "cv.k": 3})";
  ASSERT_EQ(run("synth --n 6 --size 32x32 --out " + p("data")).code, 0);
  const Result r = run("cross-validate --config " + p("c.json") + " --epochs 1 --dataset " + p("data") +
                    " --input 32x32 --out " + p("cv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json cfg = json::parse(slurp(p("cv/effective_config.json")));
  EXPECT_EQ(cfg.at("train.epochs"), 1);
  EXPECT_EQ(cfg.at("train.lr"), 0.01);
  EXPECT_EQ(cfg.at("cv.k"), 3);
  EXPECT_EQ(cfg.at("command"), "cross-validate");
}

TEST_F(Cli, StabilityWritesRows) {
  const Result r = run("stability --scales 1,2 --ratios 0.2,0.4 --out " + p("s"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(p("s/stability.csv"))), 1 + 2 * 2 * 3);
}

TEST_F(Cli, ErrorsAreSingleLine) {
  std::ofstream(p("bad.json")) << R"({"train": {"epochz": 3}})";
  std::ofstream(p("worse.json")) << "{not json";
  std::ofstream(p("typed.json")) << R"({"train": {"epochs": "many"}})";
  for (const std::string& args :
       {std::string("inspect --frobnicate"), "cross-validate --dataset " + p("nowhere") + " --out " + p("x"),
        "cross-validate --config " + p("bad.json") + " --out " + p("x"),
        "cross-validate --config " + p("worse.json") + " --out " + p("x"),
        "cross-validate --config " + p("typed.json") + " --out " + p("x"),
        "inspect --model resnet --out " + p("x"), "inspect --input 250x128 --out " + p("x"),
        "inspect --deconv-kernel 7 --out " + p("x"), std::string("metrics " + p("missing.png") + " " + p("m.png"))}) {
    const Result r = run(args);
    EXPECT_NE(r.code, 0) << args;
    EXPECT_EQ(lines(r.err), 1) << args << "\n" << r.err;
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << args << "\n" << r.err;
  }
}
