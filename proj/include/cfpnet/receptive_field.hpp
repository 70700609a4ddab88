#pragma once

// Receptive field of a sequential chain of layers.

#include <string>
#include <vector>

#include "cfpnet/error.hpp"

namespace cfpnet {

struct LayerGeometry {
  std::string name;
  std::string kind;  // "conv", "deconv", "avgpool", "maxpool", or a pointwise kind
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
};

struct ChainField {
  double rf = 1.0;
  double jump = 1.0;
};

/// RF <- RF + (k_eff - 1) * jump, jump <- jump * stride for each layer.  Transposed
/// convolutions contribute ceil(k/s) - 1 input-grid taps and divide the jump.
inline ChainField chain_receptive_field(const std::vector<LayerGeometry>& chain) {
  ChainField f;
  for (const auto& l : chain) {
    if (l.kernel <= 0 || l.stride <= 0 || l.dilation <= 0)
      throw ArgumentError("layer " + l.name + ": kernel, stride and dilation must be positive");
    if (l.kind == "conv") {
      f.rf += static_cast<double>(l.dilation) * (l.kernel - 1) * f.jump;
      f.jump *= l.stride;
    } else if (l.kind == "avgpool" || l.kind == "maxpool") {
      f.rf += static_cast<double>(l.kernel - 1) * f.jump;
      f.jump *= l.stride;
    } else if (l.kind == "deconv") {
      const int taps = (l.kernel + l.stride - 1) / l.stride;
      f.rf += static_cast<double>(taps - 1) * f.jump;
      f.jump /= l.stride;
    } else if (l.kind == "bn" || l.kind == "relu" || l.kind == "sigmoid") {
    } else {
      throw UnsupportedError("receptive field: unsupported layer kind '" + l.kind + "' at layer " + l.name);
    }
  }
  return f;
}

/// Deepest operator path of one FP channel: three 3x3 convolutions at one dilation.
inline std::vector<LayerGeometry> fp_channel_chain(int dilation) {
  return {{"op1", "conv", 3, 1, dilation}, {"op2", "conv", 3, 1, dilation}, {"op3", "conv", 3, 1, dilation}};
}

/// Receptive-field extent claimed for the widest FP channel in the original description.
inline constexpr int kClaimedFpChannelField = 103;

}  // namespace cfpnet
