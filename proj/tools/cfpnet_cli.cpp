// cfpnet: inspect, train, cross-validate, predict, benchmark, metrics, stability, synth.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cfpnet/checkpoint.hpp"
#include "cfpnet/data.hpp"
#include "cfpnet/evalbench.hpp"
#include "cfpnet/image_io.hpp"
#include "cfpnet/metrics.hpp"
#include "cfpnet/network.hpp"
#include "cfpnet/receptive_field.hpp"
#include "cfpnet/training.hpp"

namespace fs = std::filesystem;
using cfpnet::json;

namespace {

struct Size2 {
  int width;
  int height;
};

Size2 parse_size(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw cfpnet::ArgumentError("size '" + s + "' must be WxH");
  try {
    std::size_t a = 0, b = 0;
    const int w = std::stoi(s.substr(0, x), &a);
    const int h = std::stoi(s.substr(x + 1), &b);
    if (a != x || b != s.size() - x - 1 || w <= 0 || h <= 0) throw std::invalid_argument("size");
    return {w, h};
  } catch (const std::exception&) {
    throw cfpnet::ArgumentError("size '" + s + "' must be WxH with positive integers");
  }
}

template <typename V>
std::vector<V> parse_list(const std::string& s, const char* what) {
  std::vector<V> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<V, int>) out.push_back(std::stoi(item, &used));
      else out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw cfpnet::ArgumentError(std::string("bad ") + what + " list '" + s + "'");
    }
  }
  if (out.empty()) throw cfpnet::ArgumentError(std::string("empty ") + what + " list");
  return out;
}

/// Effective configuration of one subcommand: defaults, then --config file, then flags.
/// Keys are dotted; the flag of key "a.b-c" is "--b-c".
class Settings {
public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_file_, "JSON config, nested or dotted keys (flags override)");
  }

  void add(const std::string& key, json def, const std::string& help) {
    defaults_[key] = def;
    auto e = std::make_unique<Entry>();
    e->key = key;
    const std::string flag = "--" + key.substr(key.rfind('.') + 1);
    if (def.is_boolean())
      e->opt = app_->add_flag(def.get<bool>() ? flag + ",!--no-" + flag.substr(2) : flag, e->flag, help);
    else e->opt = app_->add_option(flag, e->text, help + " [" + (def.is_string() ? def.get<std::string>() : def.dump()) + "]");
    entries_.push_back(std::move(e));
  }

  /// Call after parsing.
  void resolve() {
    values_ = defaults_;
    if (!config_file_.empty()) {
      std::ifstream in(config_file_);
      if (!in) throw cfpnet::ConfigError("cannot read config file " + config_file_);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw cfpnet::ConfigError("config file " + config_file_ + " is not valid JSON");
      }
      if (!file.is_object()) throw cfpnet::ConfigError("config file must hold a JSON object");
      apply_file(file, "");
    }
    for (const auto& e : entries_) {
      if (e->opt->count() == 0) continue;
      const json& def = defaults_[e->key];
      if (def.is_boolean()) values_[e->key] = e->flag;
      else if (def.is_string()) values_[e->key] = e->text;
      else values_[e->key] = coerce(e->key, parse_scalar(e->key, e->text, def));
    }
  }

  template <typename V>
  V get(const std::string& key) const {
    return values_.at(key).get<V>();
  }
  const json& values() const { return values_; }

  /// Writes the resolved configuration to dir/effective_config.json.
  void echo(const fs::path& dir, const std::string& command) const {
    fs::create_directories(dir);
    json j = values_;
    j["command"] = command;
    std::ofstream(dir / "effective_config.json") << j.dump(2) << "\n";
  }

private:
  struct Entry {
    std::string key;
    CLI::Option* opt = nullptr;
    std::string text;
    bool flag = false;
  };

  static json parse_scalar(const std::string& key, const std::string& text, const json& def) {
    try {
      std::size_t used = 0;
      if (def.is_number_integer()) {
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
      } else {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
      }
    } catch (const std::exception&) {
    }
    throw cfpnet::ConfigError("--" + key.substr(key.rfind('.') + 1) + ": '" + text + "' is not a number");
  }

  // {"train": {"epochs": 3}} and {"train.epochs": 3} are equivalent.
  void apply_file(const json& obj, const std::string& prefix) {
    for (const auto& [k, v] : obj.items()) {
      const std::string key = prefix + k;
      if (defaults_.contains(key)) values_[key] = coerce(key, v);
      else if (v.is_object()) apply_file(v, key + ".");
      else throw cfpnet::ConfigError("unknown config key '" + key + "'");
    }
  }

  json coerce(const std::string& key, const json& v) const {
    const json& def = defaults_.at(key);
    const bool ok = (def.is_boolean() && v.is_boolean()) || (def.is_string() && v.is_string()) ||
                    (def.is_number_integer() && v.is_number_integer()) ||
                    (def.is_number_float() && v.is_number());
    if (!ok) throw cfpnet::ConfigError("config key '" + key + "' has the wrong type");
    return def.is_number_float() ? json(v.get<double>()) : v;
  }

  CLI::App* app_;
  std::string config_file_;
  json defaults_ = json::object();
  json values_ = json::object();
  std::vector<std::unique_ptr<Entry>> entries_;
};

void add_model_keys(Settings& s, const std::string& input) {
  s.add("model", "cfpnet-m", "model: cfpnet-m, unet, unet-<base>");
  s.add("input", input, "input size WxH");
  s.add("network.skip", "add", "skip connections: add or concat");
  s.add("network.deconv-kernel", 4, "deconvolution kernel (2..5)");
  s.add("network.injection", "concat", "input injection: concat, concat+1x1 or off");
  s.add("network.normalize", true, "batch normalization after convolutions");
}

void add_train_keys(Settings& s) {
  s.add("train.epochs", 150, "training epochs");
  s.add("train.batch", 4, "batch size");
  s.add("train.lr", 0.001, "Adam learning rate");
  s.add("train.beta1", 0.9, "Adam beta1");
  s.add("train.beta2", 0.999, "Adam beta2");
  s.add("seed", 0, "random seed");
}

cfpnet::ModelSpec model_spec(const Settings& s) {
  cfpnet::ModelSpec m = cfpnet::parse_model_name(s.get<std::string>("model"));
  const Size2 in = parse_size(s.get<std::string>("input"));
  m.network.input_width = in.width;
  m.network.input_height = in.height;
  m.network.skip_mode = cfpnet::parse_skip_mode(s.get<std::string>("network.skip"));
  m.network.deconv_kernel = s.get<int>("network.deconv-kernel");
  m.network.injection = cfpnet::parse_injection_mode(s.get<std::string>("network.injection"));
  m.network.normalize = s.get<bool>("network.normalize");
  if (m.kind == "cfpnet-m") cfpnet::validate(m.network);
  return m;
}

cfpnet::TrainConfig train_config(const Settings& s) {
  cfpnet::TrainConfig c;
  c.epochs = s.get<int>("train.epochs");
  c.batch_size = s.get<int>("train.batch");
  c.learning_rate = s.get<double>("train.lr");
  c.beta1 = s.get<double>("train.beta1");
  c.beta2 = s.get<double>("train.beta2");
  c.seed = s.get<std::uint64_t>("seed");
  cfpnet::validate(c);
  return c;
}

cfpnet::ResizePolicy resize_policy(const Settings& s) {
  const Size2 in = parse_size(s.get<std::string>("input"));
  const std::string mode = s.get<std::string>("data.resize");
  if (mode != "stretch" && mode != "letterbox") throw cfpnet::ConfigError("--resize must be stretch or letterbox");
  return {in.width, in.height, mode == "stretch" ? cfpnet::ResizeMode::Stretch : cfpnet::ResizeMode::Letterbox};
}

cfpnet::Dataset load(const Settings& s) {
  const std::string root = s.get<std::string>("data.dataset");
  if (root.empty()) throw cfpnet::ArgumentError("--dataset is required");
  if (!fs::is_directory(root)) throw cfpnet::DataError("dataset directory '" + root + "' does not exist");
  cfpnet::Dataset ds = cfpnet::load_dataset(root, resize_policy(s));
  for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
  return ds;
}

fs::path require_out(const Settings& s) {
  const std::string out = s.get<std::string>("out");
  if (out.empty()) throw cfpnet::ArgumentError("--out is required");
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw cfpnet::DataError("cannot write " + p.string());
  out << text;
}

cfpnet::GrayImage read_gray(const std::string& path) {
  const cfpnet::Image8 img = cfpnet::read_png(path, 1);
  cfpnet::GrayImage g(img.width, img.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = img.pixels[i] / 255.0;
  return g;
}

// ---- subcommands ----

int run_inspect(const Settings& s) {
  const cfpnet::ModelSpec spec = model_spec(s);
  const Size2 in = parse_size(s.get<std::string>("input"));
  const cfpnet::Architecture arch = cfpnet::make_architecture(spec);
  const cfpnet::ComplexityReport r = cfpnet::full_complexity(arch, in.height, in.width);
  std::printf("model            %s\n", r.model.c_str());
  std::printf("input            %dx%d\n", in.width, in.height);
  std::printf("parameters       %zu\n", r.parameter_count);
  std::printf("buffers          %zu\n", r.buffer_count);
  std::printf("macs             %zu\n", r.flops);
  std::printf("serialized bytes %zu\n", r.serialized_size);
  std::printf("receptive field per stage:\n");
  for (const auto& st : r.receptive_field_per_stage)
    std::printf("  %-10s %4d x %4d x %4d  rf %.0f\n", st.name.c_str(), st.channels, st.height, st.width,
                st.receptive_field);
  if (spec.kind == "cfpnet-m") {
    const auto fp = cfpnet::chain_receptive_field(cfpnet::fp_channel_chain(16));
    std::printf("fp channel (dilation 16) rf %.0f (claimed %d: %s)\n", fp.rf, cfpnet::kClaimedFpChannelField,
                fp.rf == cfpnet::kClaimedFpChannelField ? "reproduced" : "not reproduced");
  }
  const std::string out = s.get<std::string>("out");
  if (!out.empty()) {
    s.echo(out, "inspect");
    write_text(fs::path(out) / "layer_audit.csv", cfpnet::layer_audit_csv(r));
    write_text(fs::path(out) / "complexity.json", cfpnet::to_json(r).dump(2) + "\n");
  }
  if (s.get<bool>("inspect.sweep")) {
    std::string csv = "skip,deconv_kernel,normalize,injection,parameters,relative_error\n";
    std::printf("parameter sweep (target 654279):\n");
    for (const auto& p : cfpnet::parameter_sweep()) {
      const std::string line = std::string(cfpnet::to_string(p.config.skip_mode)) + "," +
                               std::to_string(p.config.deconv_kernel) + "," + (p.config.normalize ? "1" : "0") + "," +
                               cfpnet::to_string(p.config.injection) + "," + std::to_string(p.parameters) + "," +
                               cfpnet::format_double(p.relative_error, 5);
      std::printf("  %s\n", line.c_str());
      csv += line + "\n";
    }
    if (!out.empty()) write_text(fs::path(out) / "sweep.csv", csv);
  }
  return 0;
}

int run_train(const Settings& s) {
  const fs::path out = require_out(s);
  const cfpnet::ModelSpec spec = model_spec(s);
  const cfpnet::TrainConfig cfg = train_config(s);
  const cfpnet::Dataset ds = load(s);
  if (ds.samples.empty()) throw cfpnet::DataError("dataset is empty");
  const double frac = s.get<double>("train.val-fraction");
  if (frac < 0 || frac >= 1) throw cfpnet::ConfigError("--val-fraction must lie in [0, 1)");
  std::vector<const cfpnet::Sample*> tr, va;
  if (frac > 0) {
    std::vector<std::string> ids;
    for (const auto& x : ds.samples) ids.push_back(x.id);
    const int k = std::max(2, static_cast<int>(std::lround(1.0 / frac)));
    const cfpnet::FoldPlan plan = cfpnet::kfold_split(ids, k, cfg.seed);
    const std::set<std::string> val(plan.validation(0).begin(), plan.validation(0).end());
    for (const auto& x : ds.samples) (val.count(x.id) ? va : tr).push_back(&x);
  } else {
    tr = cfpnet::pointers(ds.samples);
  }
  s.echo(out, "train");
  cfpnet::Model<float> model(cfpnet::make_architecture(spec), cfg.seed);
  const auto res = cfpnet::train(model, tr, va, cfg, [](const cfpnet::EpochLog& e) {
    std::fprintf(stderr, "epoch %d loss %.6f", e.epoch, e.train_loss);
    if (e.val_tanimoto) std::fprintf(stderr, " val_tanimoto %.4f", *e.val_tanimoto);
    std::fprintf(stderr, "\n");
  });
  write_text(out / "train_log.csv", cfpnet::training_log_csv(res));
  cfpnet::save_checkpoint((out / "model.ckpt").string(), spec, model.params,
                          json{{"best_epoch", res.best_epoch}, {"epochs", cfg.epochs}});
  std::printf("trained %zu samples for %d epochs", tr.size(), cfg.epochs);
  if (res.best_val_tanimoto) std::printf(", best validation tanimoto %.4f at epoch %d", *res.best_val_tanimoto, res.best_epoch);
  std::printf("\ncheckpoint %s\n", (out / "model.ckpt").string().c_str());
  return 0;
}

int run_cross_validate(const Settings& s) {
  const fs::path out = require_out(s);
  const cfpnet::ModelSpec spec = model_spec(s);
  const cfpnet::TrainConfig cfg = train_config(s);
  const cfpnet::Dataset ds = load(s);
  if (ds.samples.empty()) throw cfpnet::DataError("dataset is empty");
  const bool grouped = s.get<bool>("cv.grouped");
  cfpnet::FoldPlan plan;
  if (grouped) {
    plan = cfpnet::grouped_split(ds.samples);
  } else {
    std::vector<std::string> ids;
    for (const auto& x : ds.samples) ids.push_back(x.id);
    plan = cfpnet::kfold_split(ids, s.get<int>("cv.k"), cfg.seed);
  }
  s.echo(out, "cross-validate");
  cfpnet::CrossValOptions opt;
  opt.grouped = grouped;
  opt.init_seed = cfg.seed;
  opt.on_epoch = [](std::size_t f, const cfpnet::EpochLog& e) {
    std::fprintf(stderr, "fold %zu epoch %d loss %.6f val_tanimoto %.4f\n", f + 1, e.epoch, e.train_loss,
                 e.val_tanimoto.value_or(0.0));
  };
  const cfpnet::CrossValReport r = cfpnet::cross_validate(ds.samples, plan, spec, cfg, opt);
  write_text(out / "crossval.csv", cfpnet::cross_val_csv(r));
  write_text(out / "crossval.json", cfpnet::to_json(r).dump(2) + "\n");
  if (grouped) write_text(out / "groups.csv", cfpnet::group_table_csv(r));
  for (std::size_t f = 0; f < r.training.size(); ++f)
    write_text(out / ("fold_" + std::to_string(f + 1) + "_log.csv"), cfpnet::training_log_csv(r.training[f]));
  for (std::size_t f = 0; f < r.fold_tanimoto.size(); ++f)
    std::printf("fold %zu  %6.2f%%  (%zu samples)\n", f + 1, r.fold_tanimoto[f], r.fold_sizes[f]);
  std::printf("mean %.2f%%  std %.4f\n", r.summary.mean, r.summary.std);
  return 0;
}

int run_predict(const Settings& s) {
  const fs::path out = require_out(s);
  const std::string ckpt = s.get<std::string>("checkpoint");
  if (ckpt.empty()) throw cfpnet::ArgumentError("--checkpoint is required");
  auto loaded = cfpnet::load_checkpoint<float>(ckpt);
  std::string root = s.get<std::string>("data.dataset");
  if (root.empty()) throw cfpnet::ArgumentError("--dataset is required");
  fs::path dir = fs::is_directory(fs::path(root) / "images") ? fs::path(root) / "images" : fs::path(root);
  if (!fs::is_directory(dir)) throw cfpnet::DataError("input directory '" + dir.string() + "' does not exist");
  Size2 in{loaded.spec.network.input_width, loaded.spec.network.input_height};
  if (!s.get<std::string>("input").empty()) in = parse_size(s.get<std::string>("input"));
  const std::string mode = s.get<std::string>("data.resize");
  const cfpnet::ResizePolicy pol{in.width, in.height,
                                 mode == "letterbox" ? cfpnet::ResizeMode::Letterbox : cfpnet::ResizeMode::Stretch};
  s.echo(out, "predict");
  std::map<std::string, fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files[e.path().stem().string()] = e.path();
  for (const auto& [id, path] : files) {
    cfpnet::Sample smp;
    smp.id = id;
    smp.image = cfpnet::resize_image(cfpnet::read_png(path.string(), 3), pol);
    const auto pred = cfpnet::predict(loaded.model, {&smp});
    cfpnet::Image8 img{pred[0].width, pred[0].height, 1, std::vector<std::uint8_t>(pred[0].size())};
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(pred[0].pixels[i] * 255.0));
    cfpnet::write_png((out / (id + ".png")).string(), img);
  }
  std::printf("wrote %zu prediction maps to %s\n", files.size(), out.string().c_str());
  return 0;
}

int run_benchmark(const Settings& s) {
  const cfpnet::ModelSpec spec = model_spec(s);
  const Size2 in = parse_size(s.get<std::string>("input"));
  const std::string ckpt = s.get<std::string>("checkpoint");
  cfpnet::Model<float> model = ckpt.empty() ? cfpnet::Model<float>(cfpnet::make_architecture(spec), s.get<std::uint64_t>("seed"))
                                            : cfpnet::load_checkpoint<float>(ckpt).model;
  const auto r = cfpnet::benchmark_fps(model, in.height, in.width, s.get<int>("bench.frames"), s.get<int>("bench.warmup"));
  std::printf("model %s  input %dx%d  frames %d (warmup %d)\n", r.model.c_str(), in.width, in.height, r.frames, r.warmup);
  std::printf("mean fps %.2f  latency ms: mean %.2f p50 %.2f p90 %.2f p99 %.2f\n", r.mean_fps, r.latency_mean_ms,
              r.latency_p50_ms, r.latency_p90_ms, r.latency_p99_ms);
  const std::string out = s.get<std::string>("out");
  if (!out.empty()) {
    s.echo(out, "benchmark");
    write_text(fs::path(out) / "speed.json", cfpnet::to_json(r).dump(2) + "\n");
  }
  return 0;
}

int run_metrics(const Settings& s, const std::string& a, const std::string& b) {
  const cfpnet::GrayImage ga = read_gray(a), gb = read_gray(b);
  const cfpnet::MetricSet m = cfpnet::compare(ga, gb);
  const json j{{"jaccard", m.jaccard}, {"tanimoto", m.tanimoto}, {"mae", m.mae}};
  std::printf("%s\n", j.dump().c_str());
  const std::string out = s.get<std::string>("out");
  if (!out.empty()) {
    s.echo(out, "metrics");
    write_text(fs::path(out) / "metrics.json", j.dump(2) + "\n");
  }
  return 0;
}

int run_stability(const Settings& s) {
  const fs::path out = require_out(s);
  cfpnet::StabilitySpec spec;
  const Size2 base = parse_size(s.get<std::string>("stability.base"));
  spec.base_width = base.width;
  spec.base_height = base.height;
  spec.scales = parse_list<int>(s.get<std::string>("stability.scales"), "scale");
  spec.ratios = parse_list<double>(s.get<std::string>("stability.ratios"), "ratio");
  spec.perturbation = {s.get<double>("stability.gain"), s.get<double>("stability.offset")};
  s.echo(out, "stability");
  const auto rows = cfpnet::stability_experiment(spec);
  std::string csv = "width,height,target_ratio,actual_ratio,metric,value\n";
  for (const auto& r : rows)
    csv += std::to_string(r.width) + "," + std::to_string(r.height) + "," + cfpnet::format_double(r.target_ratio, 4) +
           "," + cfpnet::format_double(r.actual_ratio, 6) + "," + r.metric + "," + cfpnet::format_double(r.value, 8) +
           "\n";
  write_text(out / "stability.csv", csv);
  const int smallest = spec.base_width * spec.scales.front();
  for (const char* metric : {"tanimoto", "jaccard_otsu", "one_minus_mae"}) {
    const double ratio_spread = cfpnet::metric_spread(
        rows, metric, [&](const cfpnet::StabilityRow& r) { return r.width == smallest; });
    const double size_spread = cfpnet::metric_spread(
        rows, metric, [&](const cfpnet::StabilityRow& r) { return r.target_ratio == spec.ratios.front(); });
    std::printf("%-14s spread over ratios %.6f  over sizes %.6f\n", metric, ratio_spread, size_spread);
  }
  std::printf("wrote %zu rows to %s\n", rows.size(), (out / "stability.csv").string().c_str());
  return 0;
}

int run_synth(const Settings& s) {
  const fs::path out = require_out(s);
  cfpnet::SyntheticSpec spec;
  spec.count = s.get<int>("synth.n");
  const Size2 sz = parse_size(s.get<std::string>("synth.size"));
  spec.width = sz.width;
  spec.height = sz.height;
  spec.object_ratio = s.get<double>("synth.ratio");
  spec.seed = s.get<std::uint64_t>("seed");
  spec.kind = cfpnet::parse_synthetic_kind(s.get<std::string>("synth.kind"));
  spec.groups = s.get<int>("synth.groups");
  const auto samples = cfpnet::generate_synthetic_dataset(spec);
  s.echo(out, "synth");
  cfpnet::write_dataset(out, samples);
  std::printf("wrote %zu samples (%dx%d, ratio %.3f) to %s\n", samples.size(), spec.width, spec.height,
              spec.object_ratio, out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CFPNet-M segmentation toolkit"};
  app.require_subcommand(1);
  std::map<std::string, std::unique_ptr<Settings>> settings;
  auto make = [&](const std::string& name, const std::string& help) -> Settings& {
    auto* sub = app.add_subcommand(name, help);
    settings[name] = std::make_unique<Settings>(sub);
    return *settings[name];
  };

  Settings& inspect = make("inspect", "layer audit and complexity report");
  add_model_keys(inspect, "256x128");
  inspect.add("inspect.sweep", false, "also run the parameter-count configuration sweep");
  inspect.add("out", "", "output directory");

  Settings& train = make("train", "train a model on a dataset");
  add_model_keys(train, "256x192");
  add_train_keys(train);
  train.add("data.dataset", "", "dataset directory (images/, masks/, optional groups.csv)");
  train.add("data.resize", "stretch", "resize mode: stretch or letterbox");
  train.add("train.val-fraction", 0.0, "fraction held out for best-checkpoint selection");
  train.add("out", "", "output directory");

  Settings& cv = make("cross-validate", "k-fold or grouped cross-validation");
  add_model_keys(cv, "256x192");
  add_train_keys(cv);
  cv.add("data.dataset", "", "dataset directory");
  cv.add("data.resize", "stretch", "resize mode: stretch or letterbox");
  cv.add("cv.k", 5, "number of random folds");
  cv.add("cv.grouped", false, "one fold per group (groups.csv)");
  cv.add("out", "", "output directory");

  Settings& predict = make("predict", "write gray prediction maps as PNG");
  predict.add("checkpoint", "", "checkpoint file");
  predict.add("data.dataset", "", "directory of PNG images (or a dataset with images/)");
  predict.add("input", "", "input size WxH (default: checkpoint's)");
  predict.add("data.resize", "stretch", "resize mode: stretch or letterbox");
  predict.add("out", "", "output directory");

  Settings& bench = make("benchmark", "inference speed over sequential frames");
  add_model_keys(bench, "256x192");
  bench.add("checkpoint", "", "optional checkpoint (default: freshly initialized weights)");
  bench.add("bench.frames", 500, "timed frames");
  bench.add("bench.warmup", 20, "untimed warmup frames");
  bench.add("seed", 0, "initialization seed");
  bench.add("out", "", "output directory");

  Settings& metrics = make("metrics", "compare two 8-bit gray PNG images");
  std::string img_a, img_b;
  app.get_subcommand("metrics")->add_option("A", img_a, "first image")->required();
  app.get_subcommand("metrics")->add_option("B", img_b, "second image")->required();
  metrics.add("out", "", "output directory");

  Settings& stab = make("stability", "metric stability over image size and object ratio");
  stab.add("stability.base", "40x20", "base pattern size WxH");
  stab.add("stability.scales", "1,2,4,8", "replication factors");
  stab.add("stability.ratios", "0.1,0.2,0.3,0.4,0.5", "object/image area ratios");
  stab.add("stability.gain", 0.8, "prediction value on the object");
  stab.add("stability.offset", 0.05, "prediction value on the background");
  stab.add("out", "", "output directory");

  Settings& synth = make("synth", "write a synthetic image/mask dataset");
  synth.add("synth.n", 30, "number of samples");
  synth.add("synth.size", "256x256", "image size WxH");
  synth.add("synth.ratio", 0.2, "object area ratio");
  synth.add("synth.kind", "disk", "disk or curve");
  synth.add("synth.groups", 0, "number of group labels (0: none)");
  synth.add("seed", 0, "random seed");
  synth.add("out", "", "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    Settings& s = *settings.at(cmd);
    s.resolve();
    if (cmd == "inspect") return run_inspect(s);
    if (cmd == "train") return run_train(s);
    if (cmd == "cross-validate") return run_cross_validate(s);
    if (cmd == "predict") return run_predict(s);
    if (cmd == "benchmark") return run_benchmark(s);
    if (cmd == "metrics") return run_metrics(s, img_a, img_b);
    if (cmd == "stability") return run_stability(s);
    if (cmd == "synth") return run_synth(s);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 1;
}
