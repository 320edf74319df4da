#include "qmat/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace qmat::nn {

AdamState AdamState::init(const std::vector<TensorPtr>& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const auto& p : params) {
    s.m.emplace_back(p->data.size(), 0.0);
    s.v.emplace_back(p->data.size(), 0.0);
  }
  return s;
}

bool AdamState::matches(const std::vector<TensorPtr>& params) const {
  if (m.size() != params.size() || v.size() != params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (m[i].size() != params[i]->data.size() || v[i].size() != params[i]->data.size())
      return false;
  return true;
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state,
               const AdamConfig& cfg) {
  if (!state.matches(params))
    throw std::invalid_argument("adam_step: state does not match parameter shapes");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    const bool has_grad = !p.grad.empty();
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      const double g = has_grad ? p.grad[j] : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace qmat::nn
