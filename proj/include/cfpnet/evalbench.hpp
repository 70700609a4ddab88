#pragma once

// Cross-validation reports, fold statistics, speed and complexity benchmarks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfpnet/checkpoint.hpp"
#include "cfpnet/data.hpp"
#include "cfpnet/error.hpp"
#include "cfpnet/network.hpp"
#include "cfpnet/training.hpp"

namespace cfpnet {

// ---- fold statistics ----

struct FoldStats {
  double mean = 0;  // percent
  double std = 0;   // fraction, population (divisor N)
};

/// Mean of percentages and population standard deviation of the corresponding fractions.
inline FoldStats aggregate_folds(const std::vector<double>& percent) {
  if (percent.empty()) throw ArgumentError("aggregate_folds: no fold values");
  double sum = 0;
  for (double v : percent) sum += v;
  const double n = static_cast<double>(percent.size());
  const double mean = sum / n;
  double ss = 0;
  for (double v : percent) ss += (v / 100.0 - mean / 100.0) * (v / 100.0 - mean / 100.0);
  return {mean, std::sqrt(ss / n)};
}

/// A printed row of fold values with its printed summary.
struct ReportedRow {
  std::string table;
  std::string model;
  std::vector<double> folds;
  double mean;
  double std;
};

struct RowCheck {
  ReportedRow row;
  FoldStats computed;
  bool mean_ok;
  bool std_ok;
  bool consistent() const { return mean_ok && std_ok; }
};

inline constexpr double kMeanTolerance = 0.01;
inline constexpr double kStdTolerance = 0.0001;

/// Recomputes each row's summary from its own folds; rows that disagree beyond the
/// tolerances are reported as inconsistent, never corrected.
inline std::vector<RowCheck> check_reported_rows(const std::vector<ReportedRow>& rows) {
  std::vector<RowCheck> out;
  for (const auto& r : rows) {
    const FoldStats s = aggregate_folds(r.folds);
    // small slack so printed values exactly on the rounding boundary are not flagged
    out.push_back({r, s, std::abs(s.mean - r.mean) <= kMeanTolerance + 1e-9,
                   std::abs(s.std - r.std) <= kStdTolerance + 1e-12});
  }
  return out;
}

/// Parses tab-separated lines "table<TAB>model<TAB>f1..fk<TAB>mean<TAB>std"; '#' starts a comment.
inline std::vector<ReportedRow> parse_reported_rows(const std::string& text) {
  std::vector<ReportedRow> rows;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::size_t a = 0;
    while (true) {
      const std::size_t b = line.find('\t', a);
      cells.push_back(line.substr(a, b == std::string::npos ? std::string::npos : b - a));
      if (b == std::string::npos) break;
      a = b + 1;
    }
    if (cells.size() < 5) throw DataError("fold table line " + std::to_string(lineno) + ": too few columns");
    ReportedRow r;
    r.table = cells[0];
    r.model = cells[1];
    try {
      for (std::size_t i = 2; i + 2 < cells.size(); ++i) r.folds.push_back(std::stod(cells[i]));
      r.mean = std::stod(cells[cells.size() - 2]);
      r.std = std::stod(cells.back());
    } catch (const std::exception&) {
      throw DataError("fold table line " + std::to_string(lineno) + ": non-numeric value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- cross-validation ----

struct GroupResult {
  std::string group;
  std::size_t fold;
  std::size_t samples;
  double tanimoto_percent;
};

struct CrossValReport {
  std::string model;
  std::vector<double> fold_tanimoto;  // percent
  std::vector<std::size_t> fold_sizes;
  std::vector<int> best_epochs;
  FoldStats summary;
  std::vector<GroupResult> groups;  // grouped plans only
  std::vector<TrainResult> training;
};

/// Throws if any validation id of a fold is also in its training set.
inline void check_no_leakage(const std::vector<const Sample*>& train_set, const std::vector<const Sample*>& val_set,
                             std::size_t fold) {
  std::set<std::string> seen;
  for (const auto* s : train_set) seen.insert(s->id);
  for (const auto* s : val_set)
    if (seen.count(s->id))
      throw DataError("fold " + std::to_string(fold + 1) + ": sample '" + s->id + "' is in both training and validation");
}

struct CrossValOptions {
  bool grouped = false;
  std::uint64_t init_seed = 0;  // weight initialization seed of every fold
  std::function<void(std::size_t fold, const EpochLog&)> on_epoch;
};

/// Trains one fresh model per fold on the complement, evaluates the mean Tanimoto on the fold.
/// The best-validation selection uses the held-out fold itself.
inline CrossValReport cross_validate(const std::vector<Sample>& samples, const FoldPlan& plan, const ModelSpec& spec,
                                     const TrainConfig& cfg, const CrossValOptions& opt = {}) {
  std::vector<std::string> universe;
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) {
    universe.push_back(s.id);
    if (!by_id.emplace(s.id, &s).second) throw DataError("duplicate sample id '" + s.id + "'");
  }
  check_partition(plan, universe);

  CrossValReport report;
  report.model = spec.name();
  for (std::size_t f = 0; f < plan.size(); ++f) {
    std::vector<const Sample*> tr, va;
    for (const auto& id : plan.training(f)) tr.push_back(by_id.at(id));
    for (const auto& id : plan.validation(f)) va.push_back(by_id.at(id));
    check_no_leakage(tr, va, f);
    Model<float> model(make_architecture(spec), opt.init_seed);
    TrainResult tres;
    try {
      tres = train(model, tr, va, cfg, [&](const EpochLog& e) {
        if (opt.on_epoch) opt.on_epoch(f, e);
      });
    } catch (const std::exception& e) {
      throw TrainingError("fold " + std::to_string(f + 1) + ": " + e.what());
    }
    const double t = 100.0 * mean_tanimoto(model, va);
    report.fold_tanimoto.push_back(t);
    report.fold_sizes.push_back(va.size());
    report.best_epochs.push_back(tres.best_epoch);
    report.training.push_back(std::move(tres));
    if (opt.grouped) report.groups.push_back({va.front()->group, f, va.size(), t});
  }
  report.summary = aggregate_folds(report.fold_tanimoto);
  return report;
}

inline std::string format_double(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string cross_val_csv(const CrossValReport& r) {
  std::string out = "fold,samples,best_epoch,mean_tanimoto_percent\n";
  for (std::size_t i = 0; i < r.fold_tanimoto.size(); ++i)
    out += std::to_string(i + 1) + "," + std::to_string(r.fold_sizes[i]) + "," + std::to_string(r.best_epochs[i]) +
           "," + format_double(r.fold_tanimoto[i], 4) + "\n";
  out += "mean,,," + format_double(r.summary.mean, 4) + "\n";
  out += "std,,," + format_double(r.summary.std, 6) + "\n";
  return out;
}

inline std::string group_table_csv(const CrossValReport& r) {
  std::string out = "group,fold,samples,tanimoto_percent\n";
  for (const auto& g : r.groups)
    out += g.group + "," + std::to_string(g.fold + 1) + "," + std::to_string(g.samples) + "," +
           format_double(g.tanimoto_percent, 4) + "\n";
  return out;
}

inline json to_json(const CrossValReport& r) {
  json j{{"model", r.model},
         {"fold_tanimoto_percent", r.fold_tanimoto},
         {"fold_sizes", r.fold_sizes},
         {"best_epochs", r.best_epochs},
         {"mean_tanimoto_percent", r.summary.mean},
         {"std", r.summary.std}};
  if (!r.groups.empty()) {
    j["groups"] = json::array();
    for (const auto& g : r.groups)
      j["groups"].push_back({{"group", g.group}, {"fold", g.fold + 1}, {"samples", g.samples},
                             {"tanimoto_percent", g.tanimoto_percent}});
  }
  return j;
}

// ---- speed ----

struct SpeedReport {
  std::string model;
  int frames = 0;
  int warmup = 0;
  int height = 0;
  int width = 0;
  double total_seconds = 0;  // sum of per-frame forward times
  double mean_fps = 0;       // frames / total_seconds
  double latency_mean_ms = 0;
  double latency_p50_ms = 0;
  double latency_p90_ms = 0;
  double latency_p99_ms = 0;
  double latency_min_ms = 0;
  double latency_max_ms = 0;
  std::vector<double> latencies_ms;
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

using Clock = std::chrono::steady_clock;

/// Times frames sequential single-image forward passes after warmup untimed ones.
/// The input is prepared once; only the forward call is inside the timed region.
inline SpeedReport benchmark_fps(Model<float>& model, int height, int width, int frames = 500, int warmup = 20) {
  if (frames < 1) throw ArgumentError("benchmark needs at least one timed frame");
  if (warmup < 0) throw ArgumentError("warmup must be >= 0");
  model.check_input(Shape{1, model.arch.input_channels, height, width});
  Tensor<float> input(Shape{1, model.arch.input_channels, height, width});
  std::mt19937_64 rng(12345);
  for (auto& v : input.values()) v = static_cast<float>(detail::uniform01(rng));

  volatile float sink = 0;
  for (int i = 0; i < warmup; ++i) sink = sink + model.forward(input)[0];
  SpeedReport r;
  r.model = model.arch.name;
  r.frames = frames;
  r.warmup = warmup;
  r.height = height;
  r.width = width;
  r.latencies_ms.reserve(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    const auto t0 = Clock::now();
    const Tensor<float> out = model.forward(input);
    const auto t1 = Clock::now();
    sink = sink + out[0];
    const double s = std::chrono::duration<double>(t1 - t0).count();
    r.total_seconds += s;
    r.latencies_ms.push_back(s * 1e3);
  }
  r.mean_fps = static_cast<double>(frames) / r.total_seconds;
  r.latency_mean_ms = r.total_seconds * 1e3 / frames;
  r.latency_p50_ms = percentile(r.latencies_ms, 0.50);
  r.latency_p90_ms = percentile(r.latencies_ms, 0.90);
  r.latency_p99_ms = percentile(r.latencies_ms, 0.99);
  r.latency_min_ms = *std::min_element(r.latencies_ms.begin(), r.latencies_ms.end());
  r.latency_max_ms = *std::max_element(r.latencies_ms.begin(), r.latencies_ms.end());
  return r;
}

inline json to_json(const SpeedReport& r) {
  return {{"model", r.model},
          {"frames", r.frames},
          {"warmup", r.warmup},
          {"input", std::to_string(r.width) + "x" + std::to_string(r.height)},
          {"total_seconds", r.total_seconds},
          {"mean_fps", r.mean_fps},
          {"latency_ms",
           {{"mean", r.latency_mean_ms},
            {"p50", r.latency_p50_ms},
            {"p90", r.latency_p90_ms},
            {"p99", r.latency_p99_ms},
            {"min", r.latency_min_ms},
            {"max", r.latency_max_ms}}}};
}

// ---- complexity ----

struct ComplexityRow {
  std::string model;
  std::size_t parameters;
  std::size_t serialized_bytes;
  std::optional<double> fps;
  std::size_t flops;  // multiply-accumulates
};

/// One row per architecture.  fps_frames > 0 also runs benchmark_fps.
inline std::vector<ComplexityRow> complexity_report(const std::vector<Architecture>& models, int height, int width,
                                                    int fps_frames = 0, int warmup = 20) {
  std::vector<ComplexityRow> rows;
  for (const auto& a : models) {
    ComplexityRow r{a.name, count_parameters(a), checkpoint_payload_bytes(a.layout), std::nullopt,
                    estimate_flops(a, height, width)};
    if (fps_frames > 0) {
      Model<float> m(a, 0);
      r.fps = benchmark_fps(m, height, width, fps_frames, warmup).mean_fps;
    }
    rows.push_back(r);
  }
  return rows;
}

inline std::string complexity_csv(const std::vector<ComplexityRow>& rows) {
  std::string out = "model,parameters,serialized_bytes,fps,flops\n";
  for (const auto& r : rows)
    out += r.model + "," + std::to_string(r.parameters) + "," + std::to_string(r.serialized_bytes) + "," +
           (r.fps ? format_double(*r.fps, 2) : std::string()) + "," + std::to_string(r.flops) + "\n";
  return out;
}

inline json to_json(const ComplexityReport& r) {
  json j{{"model", r.model},
         {"input", std::to_string(r.input_width) + "x" + std::to_string(r.input_height)},
         {"parameters", r.parameter_count},
         {"buffers", r.buffer_count},
         {"flops", r.flops},
         {"serialized_bytes", r.serialized_size},
         {"receptive_field", json::array()},
         {"layers", json::array()}};
  for (const auto& s : r.receptive_field_per_stage)
    j["receptive_field"].push_back(
        {{"stage", s.name}, {"channels", s.channels}, {"height", s.height}, {"width", s.width}, {"rf", s.receptive_field}});
  for (const auto& l : r.layers)
    j["layers"].push_back({{"name", l.name},
                           {"kind", l.kind},
                           {"out", {l.out_c, l.out_h, l.out_w}},
                           {"kernel", l.kernel},
                           {"stride", l.stride},
                           {"dilation", l.dilation},
                           {"params", l.params},
                           {"macs", l.macs}});
  return j;
}

inline std::string layer_audit_csv(const ComplexityReport& r) {
  std::string out = "name,kind,out_channels,out_height,out_width,kernel,stride,dilation,params,macs\n";
  for (const auto& l : r.layers)
    out += l.name + "," + l.kind + "," + std::to_string(l.out_c) + "," + std::to_string(l.out_h) + "," +
           std::to_string(l.out_w) + "," + std::to_string(l.kernel) + "," + std::to_string(l.stride) + "," +
           std::to_string(l.dilation) + "," + std::to_string(l.params) + "," + std::to_string(l.macs) + "\n";
  return out;
}

/// complexity() with the serialized size filled in.
inline ComplexityReport full_complexity(const Architecture& a, int height, int width) {
  ComplexityReport r = complexity(a, height, width);
  r.serialized_size = checkpoint_payload_bytes(a.layout);
  return r;
}

}  // namespace cfpnet
