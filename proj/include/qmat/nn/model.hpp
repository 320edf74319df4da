#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qmat/nn/ops.hpp"

namespace qmat::nn {

// Dense CNN regressor topology. Defaults follow the 40-layer, 3-block,
// growth-12 configuration: stem of 2k filters, non-compressing transitions,
// pre-head feature width 24 + 3*12*12 = 456, nc output nodes.
struct DenseNetConfig {
  int depth = 40;
  int num_blocks = 3;
  int growth = 12;
  int layers_per_block = 12;  // (depth - 4) / num_blocks
  int stem_channels = 24;     // 2 * growth
  double dropout = 0.2;
  int nc = 15;
  int in_channels = 3;
  int in_h = 64;
  int in_w = 64;

  // Derives layers_per_block and stem width from (depth, blocks, growth).
  static DenseNetConfig make(int depth, int num_blocks, int growth, int nc = 15,
                             double dropout = 0.2);

  int feature_width() const {
    return stem_channels + num_blocks * layers_per_block * growth;
  }
  // Input width of dense layer l (1-based, counted across blocks).
  int layer_input_width(int l) const { return growth * (l - 1) + stem_channels; }

  bool operator==(const DenseNetConfig&) const = default;
};

void validate(const DenseNetConfig& cfg);

struct DenseNetModel {
  DenseNetConfig cfg;
  TensorPtr stem_w;  // (2k, in_channels, 3, 3)
  std::vector<std::vector<DenseLayerParam>> blocks;
  TensorPtr head_w;  // (nc, feature_width)
  TensorPtr head_b;  // (nc)

  static DenseNetModel init(const DenseNetConfig& cfg, std::uint64_t seed);

  // Trainable parameters in declaration order.
  std::vector<std::pair<std::string, TensorPtr>> named_parameters();
  std::vector<TensorPtr> parameters();
  // Running statistics, same ordering convention.
  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();

  void zero_grad();
  std::uint64_t param_checksum() const;
};

// Full forward pass to the nc raw outputs. x is (B, in_channels, H, W) with
// values normalized to [0, 1]. step_key seeds the dropout masks of this call.
TensorPtr forward(DenseNetModel& model, Tape* tape, const TensorPtr& x, Mode mode,
                  std::uint64_t step_key = 0);

// Stops before the head: the (B, feature_width) pooled feature vector.
TensorPtr forward_features(DenseNetModel& model, Tape* tape, const TensorPtr& x, Mode mode,
                           std::uint64_t step_key = 0);

}  // namespace qmat::nn
