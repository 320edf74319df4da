#pragma once

#include <cstdint>
#include <vector>

#include "qmat/nn/tensor.hpp"

namespace qmat::nn {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one pair per parameter tensor.
struct AdamState {
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState init(const std::vector<TensorPtr>& params);
  bool matches(const std::vector<TensorPtr>& params) const;
};

// Standard bias-corrected Adam update, reading each parameter's .grad
// (missing gradients count as zero). Deterministic given inputs.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state,
               const AdamConfig& cfg);

}  // namespace qmat::nn
