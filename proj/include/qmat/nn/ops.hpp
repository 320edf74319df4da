#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qmat/nn/tensor.hpp"

namespace qmat::nn {

enum class Mode { train, eval };

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = m*running + (1-m)*batch

// Reverse-mode tape: ops append backward closures during the forward pass;
// backward() replays them in reverse. Pass a null Tape* to any op to run
// forward-only (inference) without recording.
class Tape {
 public:
  void record(std::function<void()> fn) { steps_.push_back(std::move(fn)); }

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must be scalar.
  void backward(const TensorPtr& loss);

  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

// Normalization scale/offset plus running statistics for eval mode.
struct NormParam {
  TensorPtr gamma;
  TensorPtr beta;
  std::vector<double> run_mean;
  std::vector<double> run_var;

  static NormParam init(int channels);
};

// Dense-block layer: normalization + rectifier composite followed by a
// 3x3 convolution emitting `growth` channels, then dropout.
struct DenseLayerParam {
  NormParam norm;
  TensorPtr conv_w;  // (growth, c_in, 3, 3)
};

// ---- primitive ops ----

TensorPtr conv2d_3x3(Tape* tape, const TensorPtr& x, const TensorPtr& w);

TensorPtr norm_relu(Tape* tape, const TensorPtr& x, NormParam& p, Mode mode);

// Transition: 2x2 average pooling, spatial dims must be even.
TensorPtr avgpool2x2(Tape* tape, const TensorPtr& x);

TensorPtr global_avgpool(Tape* tape, const TensorPtr& x);  // (B,C,H,W) -> (B,C)

TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, Mode mode, std::uint64_t key);

// ---- dense block machinery ----

// Allocates a (B, c_total, H, W) buffer with src copied into the leading
// channels. Dense layers append their outputs as channel slices, which makes
// every concatenation a view instead of a copy.
TensorPtr make_block_buffer(Tape* tape, const TensorPtr& src, int c_total);

// Runs one dense layer over buf[:, 0:c_in) and writes buf[:, c_in:c_in+growth).
// Normalization statistics are stored for the backward pass; the rectified
// activations themselves are recomputed there, not kept.
void dense_layer(Tape* tape, const TensorPtr& buf, int c_in, DenseLayerParam& p,
                 Mode mode, double dropout_rate, std::uint64_t dropout_key);

// ---- losses (mean over batch and coefficients) ----

TensorPtr logcosh_loss(Tape* tape, const TensorPtr& pred, const TensorPtr& target);
TensorPtr l2_loss(Tape* tape, const TensorPtr& pred, const TensorPtr& target);

// Numerically stable log(cosh(t)) = |t| + log1p(exp(-2|t|)) - log 2.
double logcosh(double t);

}  // namespace qmat::nn
