#pragma once

#include <optional>
#include <string>

#include "qmat/nn/adam.hpp"
#include "qmat/nn/model.hpp"

namespace qmat::nn {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  int epoch = 0;
  int qf2_hint = 0;  // qf2 the training data shared, 0 if mixed/unknown
};

// Versioned binary checkpoint: header (config, epoch, optimizer flag),
// named parameter and running-statistic blobs in declaration order, optional
// Adam moments, 64-bit checksum trailer.
void save_checkpoint(const std::string& path, DenseNetModel& model,
                     const CheckpointMeta& meta, const AdamState* optimizer);

struct LoadedCheckpoint {
  DenseNetModel model;
  CheckpointMeta meta;
  std::optional<AdamState> optimizer;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace qmat::nn
