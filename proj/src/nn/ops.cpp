#include "qmat/nn/ops.hpp"

#include <cmath>
#include <cstring>

#include "qmat/nn/kernels.hpp"

namespace qmat::nn {
namespace {

namespace K = kernels;

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct Dims4 {
  int b, c, h, w;
  std::ptrdiff_t plane() const { return static_cast<std::ptrdiff_t>(h) * w; }
  std::ptrdiff_t bstride() const { return c * plane(); }
};

Dims4 dims4(const TensorPtr& t, const char* who) {
  check(t->shape.nd == 4, who);
  return {t->shape.d[0], t->shape.d[1], t->shape.d[2], t->shape.d[3]};
}

}  // namespace

void Tape::backward(const TensorPtr& loss) {
  check(loss->numel() == 1, "backward: loss must be scalar");
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

NormParam NormParam::init(int channels) {
  NormParam p;
  p.gamma = make_tensor(Shape::of({channels}), true);
  p.beta = make_tensor(Shape::of({channels}), true);
  std::fill(p.gamma->data.begin(), p.gamma->data.end(), 1.0);
  p.run_mean.assign(channels, 0.0);
  p.run_var.assign(channels, 1.0);
  return p;
}

TensorPtr conv2d_3x3(Tape* tape, const TensorPtr& x, const TensorPtr& w) {
  const Dims4 d = dims4(x, "conv2d_3x3: input must be 4-d");
  check(w->shape.nd == 4 && w->shape.d[2] == 3 && w->shape.d[3] == 3,
        "conv2d_3x3: weights must be (out, in, 3, 3)");
  check(w->shape.d[1] == d.c, "conv2d_3x3: channel mismatch between input and weights");
  const int cout = w->shape.d[0];

  auto y = make_tensor(Shape::of({d.b, cout, d.h, d.w}));
  y->requires_grad = x->requires_grad || w->requires_grad;
  K::conv3x3_forward(x->data.data(), d.bstride(), d.c, y->data.data(),
                     static_cast<std::ptrdiff_t>(cout) * d.plane(), cout, d.b, d.h, d.w,
                     w->data.data(), false);

  if (tape && y->requires_grad) {
    tape->record([x, w, y, d, cout] {
      const std::ptrdiff_t y_bs = static_cast<std::ptrdiff_t>(cout) * d.plane();
      if (w->requires_grad) {
        w->ensure_grad();
        K::conv3x3_backward_weight(x->data.data(), d.bstride(), d.c, y->grad.data(), y_bs,
                                   cout, d.b, d.h, d.w, w->grad.data());
      }
      if (x->requires_grad) {
        x->ensure_grad();
        K::conv3x3_backward_input(y->grad.data(), y_bs, cout, x->grad.data(), d.bstride(),
                                  d.c, d.b, d.h, d.w, w->data.data());
      }
    });
  }
  return y;
}

namespace {

// Shared by norm_relu and dense_layer: batch statistics in train mode with a
// running-average update, frozen statistics in eval mode.
void resolve_stats(const double* x, std::ptrdiff_t bstride, const Dims4& d, int channels,
                   NormParam& p, Mode mode, std::vector<double>* mean,
                   std::vector<double>* inv_std) {
  mean->resize(channels);
  inv_std->resize(channels);
  if (mode == Mode::train) {
    std::vector<double> var(channels);
    K::channel_stats(x, bstride, d.b, channels, d.h, d.w, mean->data(), var.data());
    for (int c = 0; c < channels; ++c) {
      p.run_mean[c] = kBnMomentum * p.run_mean[c] + (1.0 - kBnMomentum) * (*mean)[c];
      p.run_var[c] = kBnMomentum * p.run_var[c] + (1.0 - kBnMomentum) * var[c];
      (*inv_std)[c] = 1.0 / std::sqrt(var[c] + kBnEps);
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      (*mean)[c] = p.run_mean[c];
      (*inv_std)[c] = 1.0 / std::sqrt(p.run_var[c] + kBnEps);
    }
  }
}

}  // namespace

TensorPtr norm_relu(Tape* tape, const TensorPtr& x, NormParam& p, Mode mode) {
  const Dims4 d = dims4(x, "norm_relu: input must be 4-d");
  check(p.gamma->numel() == d.c, "norm_relu: parameter channel mismatch");

  std::vector<double> mean, inv_std;
  resolve_stats(x->data.data(), d.bstride(), d, d.c, p, mode, &mean, &inv_std);

  auto y = make_tensor(x->shape);
  y->requires_grad = x->requires_grad || p.gamma->requires_grad;
  K::bn_relu_forward(x->data.data(), d.bstride(), y->data.data(), d.bstride(), d.b, d.c,
                     d.h, d.w, mean.data(), inv_std.data(), p.gamma->data.data(),
                     p.beta->data.data());

  if (tape && y->requires_grad) {
    auto gamma = p.gamma, beta = p.beta;
    const bool batch_stats = mode == Mode::train;
    tape->record([x, y, gamma, beta, d, mean = std::move(mean),
                  inv_std = std::move(inv_std), batch_stats] {
      x->ensure_grad();
      gamma->ensure_grad();
      beta->ensure_grad();
      K::bn_relu_backward(x->data.data(), d.bstride(), y->grad.data(), d.bstride(),
                          x->grad.data(), d.bstride(), d.b, d.c, d.h, d.w, mean.data(),
                          inv_std.data(), gamma->data.data(), beta->data.data(),
                          gamma->grad.data(), beta->grad.data(), batch_stats);
    });
  }
  return y;
}

TensorPtr avgpool2x2(Tape* tape, const TensorPtr& x) {
  const Dims4 d = dims4(x, "avgpool2x2: input must be 4-d");
  check(d.h % 2 == 0 && d.w % 2 == 0, "avgpool2x2: spatial dims must be even");

  auto y = make_tensor(Shape::of({d.b, d.c, d.h / 2, d.w / 2}));
  y->requires_grad = x->requires_grad;
  const std::ptrdiff_t y_bs = static_cast<std::ptrdiff_t>(d.c) * (d.h / 2) * (d.w / 2);
  K::avgpool2x2_forward(x->data.data(), d.bstride(), y->data.data(), y_bs, d.b, d.c, d.h, d.w);

  if (tape && y->requires_grad) {
    tape->record([x, y, d, y_bs] {
      x->ensure_grad();
      K::avgpool2x2_backward(y->grad.data(), y_bs, x->grad.data(), d.bstride(), d.b, d.c,
                             d.h, d.w);
    });
  }
  return y;
}

TensorPtr global_avgpool(Tape* tape, const TensorPtr& x) {
  const Dims4 d = dims4(x, "global_avgpool: input must be 4-d");
  auto y = make_tensor(Shape::of({d.b, d.c}));
  y->requires_grad = x->requires_grad;
  K::global_avgpool_forward(x->data.data(), d.bstride(), y->data.data(), d.b, d.c, d.h, d.w);

  if (tape && y->requires_grad) {
    tape->record([x, y, d] {
      x->ensure_grad();
      K::global_avgpool_backward(y->grad.data(), x->grad.data(), d.bstride(), d.b, d.c,
                                 d.h, d.w);
    });
  }
  return y;
}

TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  check(x->shape.nd == 2, "linear: input must be (batch, in)");
  check(w->shape.nd == 2, "linear: weights must be (out, in)");
  const int batch = x->shape.d[0], in = x->shape.d[1], out = w->shape.d[0];
  check(w->shape.d[1] == in, "linear: weight/input width mismatch");
  check(!b || b->numel() == out, "linear: bias width mismatch");

  auto y = make_tensor(Shape::of({batch, out}));
  y->requires_grad = x->requires_grad || w->requires_grad || (b && b->requires_grad);
  K::linear_forward(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                    y->data.data(), batch, in, out);

  if (tape && y->requires_grad) {
    tape->record([x, w, b, y, batch, in, out] {
      if (w->requires_grad) {
        w->ensure_grad();
        if (b) b->ensure_grad();
        K::linear_backward_params(y->grad.data(), x->data.data(), w->grad.data(),
                                  b ? b->grad.data() : nullptr, batch, in, out);
      }
      if (x->requires_grad) {
        x->ensure_grad();
        K::linear_backward_input(y->grad.data(), w->data.data(), x->grad.data(), batch,
                                 in, out);
      }
    });
  }
  return y;
}

TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, Mode mode, std::uint64_t key) {
  check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return x;  // identity

  auto y = make_tensor(x->shape);
  y->requires_grad = x->requires_grad;
  const std::ptrdiff_t n = x->numel();
  K::dropout_forward(x->data.data(), n, y->data.data(), n, 1, n, key, rate);

  if (tape && y->requires_grad) {
    tape->record([x, y, n, key, rate] {
      x->ensure_grad();
      K::dropout_backward(y->grad.data(), n, x->grad.data(), n, 1, n, key, rate);
    });
  }
  return y;
}

TensorPtr make_block_buffer(Tape* tape, const TensorPtr& src, int c_total) {
  const Dims4 d = dims4(src, "make_block_buffer: input must be 4-d");
  check(c_total >= d.c, "make_block_buffer: c_total smaller than input channels");

  auto buf = make_tensor(Shape::of({d.b, c_total, d.h, d.w}));
  buf->requires_grad = src->requires_grad;
  const std::ptrdiff_t buf_bs = static_cast<std::ptrdiff_t>(c_total) * d.plane();
  const std::ptrdiff_t copy_len = d.bstride();
  for (int b = 0; b < d.b; ++b)
    std::memcpy(buf->data.data() + b * buf_bs, src->data.data() + b * copy_len,
                sizeof(double) * copy_len);

  if (tape && buf->requires_grad) {
    tape->record([src, buf, d, buf_bs, copy_len] {
      src->ensure_grad();
      for (int b = 0; b < d.b; ++b) {
        const double* g = buf->grad.data() + b * buf_bs;
        double* dst = src->grad.data() + b * copy_len;
        for (std::ptrdiff_t i = 0; i < copy_len; ++i) dst[i] += g[i];
      }
    });
  }
  return buf;
}

void dense_layer(Tape* tape, const TensorPtr& buf, int c_in, DenseLayerParam& p,
                 Mode mode, double dropout_rate, std::uint64_t dropout_key) {
  const Dims4 d = dims4(buf, "dense_layer: buffer must be 4-d");
  const int growth = p.conv_w->shape.d[0];
  check(p.conv_w->shape.nd == 4 && p.conv_w->shape.d[2] == 3 && p.conv_w->shape.d[3] == 3,
        "dense_layer: conv weights must be (growth, c_in, 3, 3)");
  check(p.conv_w->shape.d[1] == c_in, "dense_layer: conv weight width mismatch");
  check(c_in + growth <= d.c, "dense_layer: slice overflows buffer channels");
  check(p.norm.gamma->numel() == c_in, "dense_layer: norm parameter width mismatch");

  const std::ptrdiff_t bstride = d.bstride();
  const std::ptrdiff_t plane = d.plane();
  const std::ptrdiff_t a_bs = static_cast<std::ptrdiff_t>(c_in) * plane;
  const std::ptrdiff_t slice_len = static_cast<std::ptrdiff_t>(growth) * plane;
  Dims4 dp{d.b, c_in, d.h, d.w};

  std::vector<double> mean, inv_std;
  resolve_stats(buf->data.data(), bstride, dp, c_in, p.norm, mode, &mean, &inv_std);

  // Rectified, normalized prefix: needed by the convolution, recomputed in
  // the backward pass instead of stored.
  std::vector<double> act(static_cast<std::size_t>(d.b) * a_bs);
  K::bn_relu_forward(buf->data.data(), bstride, act.data(), a_bs, d.b, c_in, d.h, d.w,
                     mean.data(), inv_std.data(), p.norm.gamma->data.data(),
                     p.norm.beta->data.data());

  double* slice = buf->data.data() + c_in * plane;
  K::conv3x3_forward(act.data(), a_bs, c_in, slice, bstride, growth, d.b, d.h, d.w,
                     p.conv_w->data.data(), false);

  const bool dropped = mode == Mode::train && dropout_rate > 0.0;
  if (dropped)
    K::dropout_forward(slice, bstride, slice, bstride, d.b, slice_len, dropout_key,
                       dropout_rate);

  if (tape && buf->requires_grad) {
    auto gamma = p.norm.gamma, beta = p.norm.beta, conv_w = p.conv_w;
    const bool batch_stats = mode == Mode::train;
    tape->record([buf, gamma, beta, conv_w, d, dp, c_in, growth, bstride, plane, a_bs,
                  slice_len, dropped, dropout_key, dropout_rate, batch_stats,
                  mean = std::move(mean), inv_std = std::move(inv_std)] {
      // Upstream gradient of the slice, with dropout undone.
      std::vector<double> g_out(static_cast<std::size_t>(d.b) * slice_len, 0.0);
      const double* gslice = buf->grad.data() + c_in * plane;
      if (dropped) {
        K::dropout_backward(gslice, bstride, g_out.data(), slice_len, d.b, slice_len,
                            dropout_key, dropout_rate);
      } else {
        for (int b = 0; b < d.b; ++b)
          std::memcpy(g_out.data() + b * slice_len, gslice + b * bstride,
                      sizeof(double) * slice_len);
      }

      // Recompute the rectified activations.
      std::vector<double> act(static_cast<std::size_t>(d.b) * a_bs);
      K::bn_relu_forward(buf->data.data(), bstride, act.data(), a_bs, d.b, c_in, d.h, d.w,
                         mean.data(), inv_std.data(), gamma->data.data(),
                         beta->data.data());

      conv_w->ensure_grad();
      K::conv3x3_backward_weight(act.data(), a_bs, c_in, g_out.data(), slice_len, growth,
                                 d.b, d.h, d.w, conv_w->grad.data());

      std::vector<double> g_act(static_cast<std::size_t>(d.b) * a_bs, 0.0);
      K::conv3x3_backward_input(g_out.data(), slice_len, growth, g_act.data(), a_bs, c_in,
                                d.b, d.h, d.w, conv_w->data.data());

      gamma->ensure_grad();
      beta->ensure_grad();
      K::bn_relu_backward(buf->data.data(), bstride, g_act.data(), a_bs, buf->grad.data(),
                          bstride, d.b, c_in, d.h, d.w, mean.data(), inv_std.data(),
                          gamma->data.data(), beta->data.data(), gamma->grad.data(),
                          beta->grad.data(), batch_stats);
    });
  }
}

double logcosh(double t) {
  const double a = std::fabs(t);
  return a + std::log1p(std::exp(-2.0 * a)) - 0.6931471805599453;
}

namespace {

TensorPtr reduce_loss(Tape* tape, const TensorPtr& pred, const TensorPtr& target,
                      double (*f)(double), double (*df)(double)) {
  check(pred->shape == target->shape, "loss: prediction/target shape mismatch");
  check(pred->shape.nd == 2, "loss: inputs must be (batch, nc)");
  const int n = pred->numel();
  const double inv_n = 1.0 / n;

  auto out = make_tensor(Shape::of({1}));
  out->requires_grad = pred->requires_grad;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += f(target->data[i] - pred->data[i]);
  out->data[0] = acc * inv_n;

  if (tape && out->requires_grad) {
    tape->record([pred, target, out, n, inv_n, df] {
      pred->ensure_grad();
      const double scale = out->grad[0] * inv_n;
      for (int i = 0; i < n; ++i)
        pred->grad[i] += scale * df(pred->data[i] - target->data[i]);
    });
  }
  return out;
}

}  // namespace

TensorPtr logcosh_loss(Tape* tape, const TensorPtr& pred, const TensorPtr& target) {
  return reduce_loss(tape, pred, target, [](double t) { return logcosh(t); },
                     [](double e) { return std::tanh(e); });
}

TensorPtr l2_loss(Tape* tape, const TensorPtr& pred, const TensorPtr& target) {
  return reduce_loss(tape, pred, target, [](double t) { return t * t; },
                     [](double e) { return 2.0 * e; });
}

}  // namespace qmat::nn
