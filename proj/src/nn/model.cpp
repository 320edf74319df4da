#include "qmat/nn/model.hpp"

#include <cmath>
#include <cstring>

#include "qmat/rng.hpp"

namespace qmat::nn {
namespace {

void fill_gaussian(TensorPtr& t, double stddev, std::uint64_t key) {
  CounterRng rng(key);
  for (double& v : t->data) v = stddev * rng.normal();
}

// Fan-in-scaled init for a conv kernel (out, in, 3, 3).
void init_conv(TensorPtr& w, std::uint64_t key) {
  const double fan_in = static_cast<double>(w->shape.d[1]) * 9.0;
  fill_gaussian(w, std::sqrt(2.0 / fan_in), key);
}

}  // namespace

DenseNetConfig DenseNetConfig::make(int depth, int num_blocks, int growth, int nc,
                                    double dropout) {
  DenseNetConfig cfg;
  cfg.depth = depth;
  cfg.num_blocks = num_blocks;
  cfg.growth = growth;
  cfg.nc = nc;
  cfg.dropout = dropout;
  if (num_blocks < 1 || (depth - 4) % num_blocks != 0 || (depth - 4) / num_blocks < 1)
    throw std::invalid_argument("DenseNetConfig: depth-4 must be a positive multiple of num_blocks");
  cfg.layers_per_block = (depth - 4) / num_blocks;
  cfg.stem_channels = 2 * growth;
  validate(cfg);
  return cfg;
}

void validate(const DenseNetConfig& cfg) {
  if (cfg.growth < 1 || cfg.layers_per_block < 1 || cfg.num_blocks < 1 ||
      cfg.stem_channels < 1 || cfg.nc < 1 || cfg.nc > 64)
    throw std::invalid_argument("DenseNetConfig: bad topology field");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("DenseNetConfig: dropout must be in [0, 1)");
  if (cfg.in_channels < 1 || cfg.in_h < 1 || cfg.in_w < 1)
    throw std::invalid_argument("DenseNetConfig: bad input dims");
  // Each transition halves the spatial size; dims must stay even until then.
  int h = cfg.in_h, w = cfg.in_w;
  for (int i = 0; i + 1 < cfg.num_blocks; ++i) {
    if (h % 2 != 0 || w % 2 != 0)
      throw std::invalid_argument("DenseNetConfig: input dims not divisible across transitions");
    h /= 2;
    w /= 2;
  }
}

DenseNetModel DenseNetModel::init(const DenseNetConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  DenseNetModel m;
  m.cfg = cfg;
  std::uint64_t idx = 0;
  auto key = [&] { return CounterRng::derive_key(seed, "init", idx++); };

  m.stem_w = make_tensor(Shape::of({cfg.stem_channels, cfg.in_channels, 3, 3}), true);
  init_conv(m.stem_w, key());

  int width = cfg.stem_channels;
  m.blocks.resize(cfg.num_blocks);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    for (int l = 0; l < cfg.layers_per_block; ++l) {
      DenseLayerParam p;
      p.norm = NormParam::init(width);
      p.conv_w = make_tensor(Shape::of({cfg.growth, width, 3, 3}), true);
      init_conv(p.conv_w, key());
      m.blocks[b].push_back(std::move(p));
      width += cfg.growth;
    }
  }

  m.head_w = make_tensor(Shape::of({cfg.nc, cfg.feature_width()}), true);
  fill_gaussian(m.head_w, std::sqrt(2.0 / cfg.feature_width()), key());
  m.head_b = make_tensor(Shape::of({cfg.nc}), true);
  return m;
}

std::vector<std::pair<std::string, TensorPtr>> DenseNetModel::named_parameters() {
  std::vector<std::pair<std::string, TensorPtr>> out;
  out.emplace_back("stem.w", stem_w);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t l = 0; l < blocks[b].size(); ++l) {
      const std::string base =
          "block" + std::to_string(b) + ".layer" + std::to_string(l) + ".";
      out.emplace_back(base + "gamma", blocks[b][l].norm.gamma);
      out.emplace_back(base + "beta", blocks[b][l].norm.beta);
      out.emplace_back(base + "conv_w", blocks[b][l].conv_w);
    }
  out.emplace_back("head.w", head_w);
  out.emplace_back("head.b", head_b);
  return out;
}

std::vector<TensorPtr> DenseNetModel::parameters() {
  std::vector<TensorPtr> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> DenseNetModel::named_buffers() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t l = 0; l < blocks[b].size(); ++l) {
      const std::string base =
          "block" + std::to_string(b) + ".layer" + std::to_string(l) + ".";
      out.emplace_back(base + "run_mean", &blocks[b][l].norm.run_mean);
      out.emplace_back(base + "run_var", &blocks[b][l].norm.run_var);
    }
  return out;
}

void DenseNetModel::zero_grad() {
  for (auto& p : parameters()) p->zero_grad();
}

std::uint64_t DenseNetModel::param_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const std::vector<double>& v) {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(double); ++i)
      h = (h ^ p[i]) * 0x100000001b3ull;
  };
  feed(stem_w->data);
  for (const auto& blk : blocks)
    for (const auto& layer : blk) {
      feed(layer.norm.gamma->data);
      feed(layer.norm.beta->data);
      feed(layer.conv_w->data);
    }
  feed(head_w->data);
  feed(head_b->data);
  return h;
}

TensorPtr forward_features(DenseNetModel& m, Tape* tape, const TensorPtr& x, Mode mode,
                           std::uint64_t step_key) {
  const DenseNetConfig& cfg = m.cfg;
  if (x->shape.nd != 4 || x->shape.d[1] != cfg.in_channels || x->shape.d[2] != cfg.in_h ||
      x->shape.d[3] != cfg.in_w)
    throw std::invalid_argument("forward: input shape " + x->shape.str() +
                                " does not match config");

  TensorPtr cur = conv2d_3x3(tape, x, m.stem_w);
  int width = cfg.stem_channels;
  std::uint64_t layer_idx = 0;
  for (int b = 0; b < cfg.num_blocks; ++b) {
    TensorPtr buf =
        make_block_buffer(tape, cur, width + cfg.layers_per_block * cfg.growth);
    for (int l = 0; l < cfg.layers_per_block; ++l) {
      const std::uint64_t key =
          CounterRng::derive_key(step_key, "dropout", layer_idx++);
      dense_layer(tape, buf, width, m.blocks[b][l], mode, cfg.dropout, key);
      width += cfg.growth;
    }
    cur = buf;
    if (b + 1 < cfg.num_blocks) cur = avgpool2x2(tape, cur);
  }
  return global_avgpool(tape, cur);
}

TensorPtr forward(DenseNetModel& m, Tape* tape, const TensorPtr& x, Mode mode,
                  std::uint64_t step_key) {
  TensorPtr features = forward_features(m, tape, x, mode, step_key);
  return linear(tape, features, m.head_w, m.head_b);
}

}  // namespace qmat::nn
