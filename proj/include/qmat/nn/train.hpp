#pragma once

#include <string>
#include <vector>

#include "qmat/nn/adam.hpp"
#include "qmat/nn/model.hpp"
#include "qmat/shard.hpp"

namespace qmat::nn {

struct TrainConfig {
  double lr = 1e-5;
  int batch_size = 32;
  int epochs = 1;
  enum class Loss { logcosh, l2 } loss = Loss::logcosh;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::string checkpoint_path;  // saved after every epoch when non-empty
  int qf2_hint = 0;
};

struct EpochStats {
  double train_loss = 0.0;  // mean over training batches (dropout active)
  double val_loss = 0.0;    // eval-mode loss over val records, NaN if none
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::uint64_t steps = 0;
};

// Patch pixels (interleaved HWC bytes) to a (n, 3, 64, 64) tensor in [0, 1].
TensorPtr patches_to_tensor(const std::vector<PatchRecord>& records,
                            std::size_t first, std::size_t count);
TensorPtr labels_to_tensor(const std::vector<PatchRecord>& records,
                           std::size_t first, std::size_t count, int nc);

// Eval-mode mean loss over a record set.
double evaluate_loss(DenseNetModel& model, const std::vector<PatchRecord>& records,
                     TrainConfig::Loss loss, int batch_size);

// Epoch loop over shuffled batches: forward (train mode), loss, backward,
// Adam step. Checkpoints land at cfg.checkpoint_path after each epoch.
TrainResult train(DenseNetModel& model, AdamState& opt,
                  const std::vector<PatchRecord>& train_records,
                  const std::vector<PatchRecord>& val_records, const TrainConfig& cfg);

}  // namespace qmat::nn
