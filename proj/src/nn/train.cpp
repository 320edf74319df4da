#include "qmat/nn/train.hpp"

#include <cmath>
#include <limits>

#include "qmat/log.hpp"
#include "qmat/nn/checkpoint.hpp"
#include "qmat/rng.hpp"

namespace qmat::nn {

TensorPtr patches_to_tensor(const std::vector<PatchRecord>& records,
                            std::size_t first, std::size_t count) {
  auto x = make_tensor(Shape::of({static_cast<int>(count), kPatchChannels, kPatchSide,
                                  kPatchSide}));
  constexpr double scale = 1.0 / 255.0;
  for (std::size_t b = 0; b < count; ++b) {
    const std::uint8_t* pix = records[first + b].pixels.data();
    double* dst = x->data.data() + b * kPatchBytes;
    for (int c = 0; c < kPatchChannels; ++c)
      for (int i = 0; i < kPatchSide * kPatchSide; ++i)
        dst[c * kPatchSide * kPatchSide + i] = pix[i * kPatchChannels + c] * scale;
  }
  return x;
}

TensorPtr labels_to_tensor(const std::vector<PatchRecord>& records,
                           std::size_t first, std::size_t count, int nc) {
  auto t = make_tensor(Shape::of({static_cast<int>(count), nc}));
  for (std::size_t b = 0; b < count; ++b) {
    const PatchRecord& rec = records[first + b];
    if (static_cast<int>(rec.label.size()) != nc)
      throw std::invalid_argument("record label width does not match model nc");
    for (int i = 0; i < nc; ++i) t->data[b * nc + i] = rec.label[i];
  }
  return t;
}

namespace {

TensorPtr batch_input(const std::vector<PatchRecord>& records,
                      const std::vector<std::size_t>& order, std::size_t first,
                      std::size_t count) {
  auto x = make_tensor(Shape::of({static_cast<int>(count), kPatchChannels, kPatchSide,
                                  kPatchSide}));
  constexpr double scale = 1.0 / 255.0;
  for (std::size_t b = 0; b < count; ++b) {
    const std::uint8_t* pix = records[order[first + b]].pixels.data();
    double* dst = x->data.data() + b * kPatchBytes;
    for (int c = 0; c < kPatchChannels; ++c)
      for (int i = 0; i < kPatchSide * kPatchSide; ++i)
        dst[c * kPatchSide * kPatchSide + i] = pix[i * kPatchChannels + c] * scale;
  }
  return x;
}

TensorPtr batch_labels(const std::vector<PatchRecord>& records,
                       const std::vector<std::size_t>& order, std::size_t first,
                       std::size_t count, int nc) {
  auto t = make_tensor(Shape::of({static_cast<int>(count), nc}));
  for (std::size_t b = 0; b < count; ++b) {
    const PatchRecord& rec = records[order[first + b]];
    if (static_cast<int>(rec.label.size()) != nc)
      throw std::invalid_argument("record label width does not match model nc");
    for (int i = 0; i < nc; ++i) t->data[b * nc + i] = rec.label[i];
  }
  return t;
}

TensorPtr apply_loss(Tape* tape, TrainConfig::Loss kind, const TensorPtr& pred,
                     const TensorPtr& target) {
  return kind == TrainConfig::Loss::logcosh ? logcosh_loss(tape, pred, target)
                                            : l2_loss(tape, pred, target);
}

}  // namespace

double evaluate_loss(DenseNetModel& model, const std::vector<PatchRecord>& records,
                     TrainConfig::Loss loss, int batch_size) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (std::size_t ofs = 0; ofs < records.size(); ofs += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, records.size() - ofs);
    TensorPtr x = patches_to_tensor(records, ofs, n);
    TensorPtr y = labels_to_tensor(records, ofs, n, model.cfg.nc);
    TensorPtr out = forward(model, nullptr, x, Mode::eval);
    acc += apply_loss(nullptr, loss, out, y)->data[0] * static_cast<double>(n);
  }
  return acc / static_cast<double>(records.size());
}

TrainResult train(DenseNetModel& model, AdamState& opt,
                  const std::vector<PatchRecord>& train_records,
                  const std::vector<PatchRecord>& val_records, const TrainConfig& cfg) {
  if (train_records.empty()) throw std::invalid_argument("train: no training records");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.lr <= 0.0) throw std::invalid_argument("train: learning rate must be positive");

  auto params = model.parameters();
  if (!opt.matches(params))
    throw std::invalid_argument("train: optimizer state does not match model");
  const AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps};

  TrainResult result;
  std::vector<std::size_t> order(train_records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng shuffle_rng(CounterRng::derive_key(cfg.seed, "shuffle", epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);

    double loss_sum = 0.0;
    for (std::size_t ofs = 0; ofs < order.size(); ofs += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - ofs);
      TensorPtr x = batch_input(train_records, order, ofs, n);
      TensorPtr y = batch_labels(train_records, order, ofs, n, model.cfg.nc);

      Tape tape;
      const std::uint64_t step_key = CounterRng::derive_key(cfg.seed, "step", result.steps);
      TensorPtr out = forward(model, &tape, x, Mode::train, step_key);
      TensorPtr loss = apply_loss(&tape, cfg.loss, out, y);
      model.zero_grad();
      tape.backward(loss);
      adam_step(params, opt, adam);
      loss_sum += loss->data[0] * static_cast<double>(n);
      ++result.steps;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_loss = evaluate_loss(model, val_records, cfg.loss, cfg.batch_size);
    result.history.push_back(stats);
    QMAT_LOG_INFO("epoch " << epoch + 1 << "/" << cfg.epochs
                           << " train_loss=" << stats.train_loss
                           << " val_loss=" << stats.val_loss);

    if (!cfg.checkpoint_path.empty()) {
      CheckpointMeta meta;
      meta.epoch = epoch + 1;
      meta.qf2_hint = cfg.qf2_hint;
      save_checkpoint(cfg.checkpoint_path, model, meta, &opt);
    }
  }
  return result;
}

}  // namespace qmat::nn
