#include "qmat/estimator.hpp"

#include <cmath>

#include "qmat/nn/train.hpp"

namespace qmat {

Estimate estimate_from_raw(std::vector<double> raw) {
  Estimate e;
  e.rounded.reserve(raw.size());
  for (double v : raw) {
    int r = static_cast<int>(std::floor(v + 0.5));
    if (r < 1) r = 1;
    e.rounded.push_back(r);
  }
  e.raw = std::move(raw);
  return e;
}

Estimate estimate(nn::DenseNetModel& model, const std::uint8_t* pixels) {
  auto x = nn::make_tensor(nn::Shape::of({1, kPatchChannels, kPatchSide, kPatchSide}));
  constexpr double scale = 1.0 / 255.0;
  for (int c = 0; c < kPatchChannels; ++c)
    for (int i = 0; i < kPatchSide * kPatchSide; ++i)
      x->data[c * kPatchSide * kPatchSide + i] = pixels[i * kPatchChannels + c] * scale;
  nn::TensorPtr out = nn::forward(model, nullptr, x, nn::Mode::eval);
  return estimate_from_raw(out->data);
}

std::vector<Estimate> estimate_batch(nn::DenseNetModel& model,
                                     const std::vector<PatchRecord>& records,
                                     int batch_size) {
  std::vector<Estimate> out;
  out.reserve(records.size());
  const int nc = model.cfg.nc;
  for (std::size_t ofs = 0; ofs < records.size(); ofs += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, records.size() - ofs);
    nn::TensorPtr x = nn::patches_to_tensor(records, ofs, n);
    nn::TensorPtr raw = nn::forward(model, nullptr, x, nn::Mode::eval);
    for (std::size_t b = 0; b < n; ++b)
      out.push_back(estimate_from_raw(
          {raw->data.begin() + b * nc, raw->data.begin() + (b + 1) * nc}));
  }
  return out;
}

PatchMetrics patch_metrics(const Estimate& est, const std::vector<int>& truth) {
  if (est.rounded.size() != truth.size())
    throw std::invalid_argument("patch_metrics: estimate/truth length mismatch");
  PatchMetrics m;
  const std::size_t nc = truth.size();
  for (std::size_t i = 0; i < nc; ++i) {
    const double d = static_cast<double>(truth[i] - est.rounded[i]);
    m.mse += d * d;
    if (est.rounded[i] == truth[i]) m.acc += 1.0;
  }
  m.mse /= static_cast<double>(nc);
  m.acc /= static_cast<double>(nc);
  return m;
}

std::vector<double> per_coefficient_accuracy(const std::vector<Estimate>& estimates,
                                             const std::vector<std::vector<int>>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw std::invalid_argument("per_coefficient_accuracy: empty or mismatched inputs");
  const std::size_t nc = truths.front().size();
  std::vector<double> acc(nc, 0.0);
  for (std::size_t p = 0; p < estimates.size(); ++p) {
    if (estimates[p].rounded.size() != nc || truths[p].size() != nc)
      throw std::invalid_argument("per_coefficient_accuracy: ragged inputs");
    for (std::size_t i = 0; i < nc; ++i)
      if (estimates[p].rounded[i] == truths[p][i]) acc[i] += 1.0;
  }
  for (double& v : acc) v /= static_cast<double>(estimates.size());
  return acc;
}

}  // namespace qmat
