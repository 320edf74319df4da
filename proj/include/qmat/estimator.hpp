#pragma once

#include <vector>

#include "qmat/nn/model.hpp"
#include "qmat/shard.hpp"

namespace qmat {

// Network output for one patch: raw real values plus the integer estimate.
// rounded[i] = max(1, floor(raw[i] + 0.5)) - nearest integer, halves up,
// clamped to positive steps.
struct Estimate {
  std::vector<double> raw;
  std::vector<int> rounded;
};

struct PatchMetrics {
  double mse = 0.0;  // over the rounded estimates
  double acc = 0.0;  // fraction of exact matches
};

// Rounding/clamping applied to raw network outputs.
Estimate estimate_from_raw(std::vector<double> raw);

// Eval-mode inference on one 64x64x3 patch (interleaved bytes).
Estimate estimate(nn::DenseNetModel& model, const std::uint8_t* pixels);

// Batched inference over records (eval mode, deterministic).
std::vector<Estimate> estimate_batch(nn::DenseNetModel& model,
                                     const std::vector<PatchRecord>& records,
                                     int batch_size = 32);

PatchMetrics patch_metrics(const Estimate& est, const std::vector<int>& truth);

// Per-coefficient exact-match rates over a set of patches.
std::vector<double> per_coefficient_accuracy(const std::vector<Estimate>& estimates,
                                             const std::vector<std::vector<int>>& truths);

}  // namespace qmat
