#pragma once

// Model descriptors and the weight checkpoint format:
//   "CFPNCKPT" | u32 version | u64 header length | JSON header | float32 arrays (little-endian, layout order)

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cfpnet/error.hpp"
#include "cfpnet/network.hpp"

namespace cfpnet {

using json = nlohmann::json;

/// Which architecture to build, and how.
struct ModelSpec {
  std::string kind = "cfpnet-m";  // "cfpnet-m" or "unet"
  NetworkConfig network;          // cfpnet-m only
  int unet_base = 64;             // unet only

  std::string name() const { return kind == "unet" ? "unet-" + std::to_string(unet_base) : kind; }
};

/// "cfpnet-m", "unet" (base 64) or "unet-<base>".
inline ModelSpec parse_model_name(const std::string& name) {
  ModelSpec s;
  if (name == "cfpnet-m" || name == "cfpnet") return s;
  if (name == "unet") {
    s.kind = "unet";
    return s;
  }
  if (name.rfind("unet-", 0) == 0) {
    s.kind = "unet";
    try {
      std::size_t used = 0;
      s.unet_base = std::stoi(name.substr(5), &used);
      if (used != name.size() - 5) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ArgumentError("bad model name '" + name + "'");
    }
    return s;
  }
  throw ArgumentError("unknown model '" + name + "' (expected cfpnet-m, unet or unet-<base>)");
}

inline Architecture make_architecture(const ModelSpec& s) {
  if (s.kind == "cfpnet-m") return make_cfpnet_m(s.network);
  if (s.kind == "unet") return make_unet(s.unet_base);
  throw ArgumentError("unknown model kind '" + s.kind + "'");
}

inline SkipMode parse_skip_mode(const std::string& s) {
  if (s == "add") return SkipMode::Add;
  if (s == "concat") return SkipMode::Concat;
  throw ConfigError("unknown skip mode '" + s + "' (expected add or concat)");
}

inline InjectionMode parse_injection_mode(const std::string& s) {
  if (s == "concat") return InjectionMode::Concat;
  if (s == "concat+1x1") return InjectionMode::ConcatProject;
  if (s == "off") return InjectionMode::Off;
  throw ConfigError("unknown injection mode '" + s + "' (expected concat, concat+1x1 or off)");
}

inline json to_json(const NetworkConfig& c) {
  return {{"input_height", c.input_height},
          {"input_width", c.input_width},
          {"input_channels", c.input_channels},
          {"stage_widths", c.stage_widths},
          {"stage2_dilations", c.stage2_dilations},
          {"stage3_dilations", c.stage3_dilations},
          {"skip_mode", to_string(c.skip_mode)},
          {"deconv_kernel", c.deconv_kernel},
          {"injection", to_string(c.injection)},
          {"normalize", c.normalize}};
}

inline NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  try {
    c.input_height = j.value("input_height", c.input_height);
    c.input_width = j.value("input_width", c.input_width);
    c.input_channels = j.value("input_channels", c.input_channels);
    if (j.contains("stage_widths")) c.stage_widths = j.at("stage_widths").get<std::array<int, 3>>();
    if (j.contains("stage2_dilations")) c.stage2_dilations = j.at("stage2_dilations").get<std::vector<int>>();
    if (j.contains("stage3_dilations")) c.stage3_dilations = j.at("stage3_dilations").get<std::vector<int>>();
    if (j.contains("skip_mode")) c.skip_mode = parse_skip_mode(j.at("skip_mode").get<std::string>());
    c.deconv_kernel = j.value("deconv_kernel", c.deconv_kernel);
    if (j.contains("injection")) c.injection = parse_injection_mode(j.at("injection").get<std::string>());
    c.normalize = j.value("normalize", c.normalize);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad network config: ") + e.what());
  }
  return c;
}

inline json to_json(const ModelSpec& s) {
  json j{{"kind", s.kind}, {"name", s.name()}};
  if (s.kind == "unet") j["unet_base"] = s.unet_base;
  else j["network"] = to_json(s.network);
  return j;
}

inline ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  s.kind = j.value("kind", s.kind);
  s.unet_base = j.value("unet_base", s.unet_base);
  if (j.contains("network")) s.network = network_config_from_json(j.at("network"));
  return s;
}

namespace detail {
inline constexpr char kCheckpointMagic[8] = {'C', 'F', 'P', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename V>
void write_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V read_pod(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  return v;
}
}  // namespace detail

/// Bytes of the array payload of a float32 checkpoint (trainable arrays plus buffers).
inline std::size_t checkpoint_payload_bytes(const ParamLayout& layout) {
  std::size_t n = 0;
  for (const auto& s : layout.specs()) n += s.shape.numel();
  return n * sizeof(float);
}

/// Writes every array (trainable and buffer) as float32.  extra is stored under "meta".
template <typename T>
void save_checkpoint(const std::string& path, const ModelSpec& spec, const ParamStore<T>& params,
                     const json& extra = json::object()) {
  json header{{"model", to_json(spec)}, {"meta", extra}, {"arrays", json::array()}};
  for (const auto& p : params) {
    const Shape& s = p.value.shape();
    header["arrays"].push_back({{"name", p.name}, {"shape", {s.n, s.c, s.h, s.w}}, {"trainable", p.trainable}});
  }
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(detail::kCheckpointMagic, 8);
  detail::write_pod<std::uint32_t>(out, detail::kCheckpointVersion);
  detail::write_pod<std::uint64_t>(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  std::vector<float> buf;
  for (const auto& p : params) {
    buf.assign(p.value.data(), p.value.data() + p.value.size());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

template <typename T>
struct LoadedCheckpoint {
  ModelSpec spec;
  json meta;
  Model<T> model;
};

template <typename T = float>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) throw DataError(path + ": not a checkpoint file");
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != detail::kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = detail::read_pod<std::uint64_t>(in);
  if (!in || len > (1u << 26)) throw DataError(path + ": corrupt checkpoint header");
  std::string h(len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(len));
  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupt checkpoint header (" + e.what() + ")");
  }
  ModelSpec spec = model_spec_from_json(header.at("model"));
  Model<T> model(make_architecture(spec), 0);
  const auto& arrays = header.at("arrays");
  if (arrays.size() != model.params.size())
    throw DataError(path + ": checkpoint has " + std::to_string(arrays.size()) + " arrays, model expects " +
                    std::to_string(model.params.size()));
  std::vector<float> buf;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    auto& p = model.params[i];
    if (arrays[i].at("name").get<std::string>() != p.name)
      throw DataError(path + ": array " + std::to_string(i) + " is '" + arrays[i].at("name").get<std::string>() +
                      "', expected '" + p.name + "'");
    buf.resize(p.value.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw DataError(path + ": truncated checkpoint");
    for (std::size_t k = 0; k < buf.size(); ++k) p.value[k] = static_cast<T>(buf[k]);
  }
  return {std::move(spec), header.value("meta", json::object()), std::move(model)};
}

}  // namespace cfpnet
