#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "qmat/nn/model.hpp"
#include "qmat/nn/ops.hpp"
#include "qmat/rng.hpp"

using namespace qmat::nn;
using qmat::CounterRng;

namespace {

TensorPtr random_tensor(Shape s, std::uint64_t key, bool rg = true, double scale = 1.0) {
  auto t = make_tensor(s, rg);
  CounterRng rng(key);
  for (double& v : t->data) v = scale * rng.normal();
  return t;
}

// Scalar probe: loss = sum_i w_i * out_i with fixed random weights, so every
// output element influences the gradient.
TensorPtr weighted_sum(Tape* tape, const TensorPtr& x, const std::vector<double>& w) {
  REQUIRE(static_cast<int>(w.size()) == x->numel());
  auto out = make_tensor(Shape::of({1}));
  out->requires_grad = x->requires_grad;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x->data[i];
  out->data[0] = acc;
  if (tape && out->requires_grad)
    tape->record([x, out, w] {
      x->ensure_grad();
      for (std::size_t i = 0; i < w.size(); ++i) x->grad[i] += out->grad[0] * w[i];
    });
  return out;
}

// Central finite differences on >= n_coords random coordinates of `param`,
// against the analytic gradient already stored in param->grad.
void check_fd(const TensorPtr& param, const std::function<double()>& loss,
              int n_coords, std::uint64_t key, double step = 1e-3, double tol = 1e-4) {
  REQUIRE(!param->grad.empty());
  CounterRng rng(key);
  for (int k = 0; k < n_coords; ++k) {
    const int i = rng.uniform_int(0, param->numel() - 1);
    const double saved = param->data[i];
    param->data[i] = saved + step;
    const double up = loss();
    param->data[i] = saved - step;
    const double down = loss();
    param->data[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = param->grad[i];
    const double rel = std::fabs(numeric - analytic) /
                       std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
    CAPTURE(i);
    CAPTURE(numeric);
    CAPTURE(analytic);
    CHECK(rel < tol);
  }
}

}  // namespace

TEST_CASE("conv2d_3x3: identity kernel and all-ones kernel") {
  auto x = random_tensor(Shape::of({1, 1, 6, 6}), 1, false);
  auto w = make_tensor(Shape::of({1, 1, 3, 3}));
  w->data[4] = 1.0;  // center tap
  auto y = conv2d_3x3(nullptr, x, w);
  for (int i = 0; i < x->numel(); ++i) CHECK(y->data[i] == x->data[i]);

  auto ones_in = make_tensor(Shape::of({1, 1, 6, 6}));
  std::fill(ones_in->data.begin(), ones_in->data.end(), 1.0);
  auto ones_w = make_tensor(Shape::of({1, 1, 3, 3}));
  std::fill(ones_w->data.begin(), ones_w->data.end(), 1.0);
  auto y2 = conv2d_3x3(nullptr, ones_in, ones_w);
  CHECK(y2->data[1 * 6 + 1] == 9.0);  // interior: 9 ones
  CHECK(y2->data[0] == 4.0);          // corner: 2x2 window
}

TEST_CASE("conv2d_3x3 rejects channel mismatch") {
  auto x = random_tensor(Shape::of({1, 2, 6, 6}), 2);
  auto w = random_tensor(Shape::of({3, 5, 3, 3}), 3);
  CHECK_THROWS_AS(conv2d_3x3(nullptr, x, w), std::invalid_argument);
}

TEST_CASE("conv2d_3x3 gradients match finite differences") {
  auto x = random_tensor(Shape::of({2, 3, 5, 6}), 4);
  auto w = random_tensor(Shape::of({4, 3, 3, 3}), 5);
  CounterRng wrng(6);
  std::vector<double> probe(2 * 4 * 5 * 6);
  for (double& v : probe) v = wrng.normal();

  auto run = [&] {
    Tape tape;
    auto loss = weighted_sum(&tape, conv2d_3x3(&tape, x, w), probe);
    return std::make_pair(loss->data[0], std::move(tape));
  };
  {
    auto [val, tape] = run();
    Tape t2;
    auto loss = weighted_sum(&t2, conv2d_3x3(&t2, x, w), probe);
    t2.backward(loss);
  }
  auto loss_only = [&] {
    return weighted_sum(nullptr, conv2d_3x3(nullptr, x, w), probe)->data[0];
  };
  check_fd(x, loss_only, 25, 7);
  check_fd(w, loss_only, 25, 8);
}

TEST_CASE("norm_relu gradients match finite differences (train stats)") {
  // Keep pre-activations away from the rectifier kink so central differences
  // are valid.
  TensorPtr x;
  NormParam p = NormParam::init(3);
  std::uint64_t seed = 20;
  for (;; ++seed) {
    x = random_tensor(Shape::of({2, 3, 4, 4}), seed);
    auto y = norm_relu(nullptr, x, p, Mode::train);
    // recover pre-activation = y where positive; count near-kink as |pre|<0.05
    bool ok = true;
    NormParam probe_p = NormParam::init(3);
    auto probe = norm_relu(nullptr, x, probe_p, Mode::train);
    std::vector<double> mean(3), var(3);
    qmat::nn::kernels::channel_stats(x->data.data(), 48, 2, 3, 4, 4, mean.data(),
                                     var.data());
    for (int b = 0; b < 2 && ok; ++b)
      for (int c = 0; c < 3 && ok; ++c)
        for (int i = 0; i < 16 && ok; ++i) {
          const double xhat = (x->data[b * 48 + c * 16 + i] - mean[c]) /
                              std::sqrt(var[c] + kBnEps);
          if (std::fabs(xhat) < 0.05) ok = false;
        }
    if (ok) break;
  }
  CounterRng grng(21);
  p.gamma->data = {1.1, 0.9, 1.3};
  p.beta->data = {0.1, -0.2, 0.05};
  std::vector<double> probe(2 * 3 * 4 * 4);
  for (double& v : probe) v = grng.normal();

  {
    // Fresh params each backward so running stats do not drift mid-check.
    Tape tape;
    auto loss = weighted_sum(&tape, norm_relu(&tape, x, p, Mode::train), probe);
    tape.backward(loss);
  }
  auto loss_only = [&] {
    NormParam tmp;
    tmp.gamma = p.gamma;
    tmp.beta = p.beta;
    tmp.run_mean = p.run_mean;
    tmp.run_var = p.run_var;
    return weighted_sum(nullptr, norm_relu(nullptr, x, tmp, Mode::train), probe)->data[0];
  };
  check_fd(x, loss_only, 25, 22);
  check_fd(p.gamma, loss_only, 10, 23);
  check_fd(p.beta, loss_only, 10, 24);
}

TEST_CASE("norm_relu eval mode uses frozen statistics") {
  auto x = random_tensor(Shape::of({1, 2, 3, 3}), 30);
  NormParam p = NormParam::init(2);
  p.run_mean = {0.2, -0.1};
  p.run_var = {1.5, 0.7};
  auto y1 = norm_relu(nullptr, x, p, Mode::eval);
  auto y2 = norm_relu(nullptr, x, p, Mode::eval);
  CHECK(y1->data == y2->data);  // no stat updates in eval
  CHECK(p.run_mean[0] == 0.2);

  for (int i = 0; i < x->numel(); ++i) {
    const int c = (i / 9) % 2;
    const double pre = (x->data[i] - p.run_mean[c]) / std::sqrt(p.run_var[c] + kBnEps);
    CHECK(y1->data[i] == doctest::Approx(std::max(0.0, pre)).epsilon(1e-12));
  }
}

TEST_CASE("transition pooling: shapes, constants, gradient") {
  auto c = make_tensor(Shape::of({1, 2, 4, 4}));
  std::fill(c->data.begin(), c->data.end(), 3.25);
  auto pooled = avgpool2x2(nullptr, c);
  CHECK(pooled->shape == Shape::of({1, 2, 2, 2}));
  for (double v : pooled->data) CHECK(v == 3.25);

  auto odd = make_tensor(Shape::of({1, 1, 5, 4}));
  CHECK_THROWS_AS(avgpool2x2(nullptr, odd), std::invalid_argument);

  auto x = random_tensor(Shape::of({2, 3, 6, 4}), 31);
  CounterRng wrng(32);
  std::vector<double> probe(2 * 3 * 3 * 2);
  for (double& v : probe) v = wrng.normal();
  {
    Tape tape;
    auto loss = weighted_sum(&tape, avgpool2x2(&tape, x), probe);
    tape.backward(loss);
  }
  check_fd(x, [&] { return weighted_sum(nullptr, avgpool2x2(nullptr, x), probe)->data[0]; },
           25, 33);
}

TEST_CASE("global average pool: values and gradient") {
  auto x = random_tensor(Shape::of({2, 3, 4, 5}), 40);
  auto y = global_avgpool(nullptr, x);
  CHECK(y->shape == Shape::of({2, 3}));
  double acc = 0.0;
  for (int i = 0; i < 20; ++i) acc += x->data[20 + i];  // b=0, c=1 plane
  CHECK(y->data[1] == doctest::Approx(acc / 20.0).epsilon(1e-12));

  CounterRng wrng(41);
  std::vector<double> probe(6);
  for (double& v : probe) v = wrng.normal();
  {
    Tape tape;
    auto loss = weighted_sum(&tape, global_avgpool(&tape, x), probe);
    tape.backward(loss);
  }
  check_fd(x, [&] { return weighted_sum(nullptr, global_avgpool(nullptr, x), probe)->data[0]; },
           25, 42);
}

TEST_CASE("linear: values and gradients") {
  auto x = random_tensor(Shape::of({3, 7}), 50);
  auto w = random_tensor(Shape::of({4, 7}), 51);
  auto b = random_tensor(Shape::of({4}), 52);
  CounterRng wrng(53);
  std::vector<double> probe(12);
  for (double& v : probe) v = wrng.normal();
  {
    Tape tape;
    auto loss = weighted_sum(&tape, linear(&tape, x, w, b), probe);
    tape.backward(loss);
  }
  auto loss_only = [&] {
    return weighted_sum(nullptr, linear(nullptr, x, w, b), probe)->data[0];
  };
  check_fd(x, loss_only, 21, 54);
  check_fd(w, loss_only, 25, 55);
  check_fd(b, loss_only, 4, 56);

  auto wrong = random_tensor(Shape::of({4, 8}), 57);
  CHECK_THROWS_AS(linear(nullptr, x, wrong, b), std::invalid_argument);
}

TEST_CASE("dropout: identity in eval, keyed mask in train, exact gradient") {
  auto x = random_tensor(Shape::of({2, 3, 4, 4}), 60);
  CHECK(dropout(nullptr, x, 0.2, Mode::eval, 1).get() == x.get());
  CHECK(dropout(nullptr, x, 0.0, Mode::train, 1).get() == x.get());

  auto y = dropout(nullptr, x, 0.3, Mode::train, 77);
  auto y2 = dropout(nullptr, x, 0.3, Mode::train, 77);
  CHECK(y->data == y2->data);

  // Dropout with a fixed mask is linear, so finite differences are exact.
  CounterRng wrng(61);
  std::vector<double> probe(x->numel());
  for (double& v : probe) v = wrng.normal();
  {
    Tape tape;
    auto loss = weighted_sum(&tape, dropout(&tape, x, 0.3, Mode::train, 77), probe);
    tape.backward(loss);
  }
  check_fd(x, [&] {
    return weighted_sum(nullptr, dropout(nullptr, x, 0.3, Mode::train, 77), probe)->data[0];
  }, 25, 62);
}

TEST_CASE("dense_layer equals the composition of its primitives") {
  const int c_in = 5, growth = 3, B = 2, H = 6, W = 4;
  auto src = random_tensor(Shape::of({B, c_in, H, W}), 70);

  DenseLayerParam p;
  p.norm = NormParam::init(c_in);
  CounterRng prng(71);
  for (double& v : p.norm.gamma->data) v = 0.8 + 0.4 * prng.next_double();
  for (double& v : p.norm.beta->data) v = 0.2 * prng.normal();
  p.conv_w = random_tensor(Shape::of({growth, c_in, 3, 3}), 72, true, 0.4);

  const std::uint64_t key = 424242;
  const double rate = 0.25;

  // Fused path.
  auto fused_norm_state = p.norm;  // running stats are mutated; keep copies
  Tape tape_fused;
  auto buf = make_block_buffer(&tape_fused, src, c_in + growth);
  dense_layer(&tape_fused, buf, c_in, p, Mode::train, rate, key);

  // Composed path with identical parameters and dropout key.
  DenseLayerParam q;
  q.norm.gamma = make_tensor(Shape::of({c_in}), true);
  q.norm.beta = make_tensor(Shape::of({c_in}), true);
  q.norm.gamma->data = p.norm.gamma->data;
  q.norm.beta->data = p.norm.beta->data;
  q.norm.run_mean = fused_norm_state.run_mean;
  q.norm.run_var = fused_norm_state.run_var;
  auto src2 = make_tensor(src->shape, true);
  src2->data = src->data;
  Tape tape_comp;
  auto a = norm_relu(&tape_comp, src2, q.norm, Mode::train);
  auto conv = conv2d_3x3(&tape_comp, a, p.conv_w);
  auto out = dropout(&tape_comp, conv, rate, Mode::train, key);

  const std::ptrdiff_t plane = H * W;
  const std::ptrdiff_t buf_bs = (c_in + growth) * plane;
  for (int b = 0; b < B; ++b)
    for (std::ptrdiff_t i = 0; i < growth * plane; ++i)
      REQUIRE(buf->data[b * buf_bs + c_in * plane + i] ==
              doctest::Approx(out->data[b * growth * plane + i]).epsilon(1e-13));

  // Same upstream gradient through both paths.
  CounterRng wrng(73);
  std::vector<double> probe_slice(B * growth * plane);
  for (double& v : probe_slice) v = wrng.normal();

  auto fused_loss = make_tensor(Shape::of({1}));
  fused_loss->requires_grad = true;
  buf->ensure_grad();
  for (int b = 0; b < B; ++b)
    for (std::ptrdiff_t i = 0; i < growth * plane; ++i)
      buf->grad[b * buf_bs + c_in * plane + i] = probe_slice[b * growth * plane + i];
  // replay fused tape manually (gradient already seeded on the slice)
  {
    Tape empty;
    (void)empty;
  }
  // Tape::backward seeds a scalar; here we invoke the recorded closures via a
  // scalar proxy instead: rebuild with weighted_sum on a dense copy.
  // Simpler: run closures through backward on composed path and compare
  // against fused closures executed by hand.
  // The fused tape's only closures are make_block_buffer and dense_layer;
  // execute them by calling backward on a dummy scalar that is already
  // seeded.
  auto dummy = make_tensor(Shape::of({1}));
  dummy->requires_grad = true;
  tape_fused.record([] {});
  tape_fused.backward(dummy);

  Tape t2;
  auto loss2 = weighted_sum(&tape_comp, out, probe_slice);
  tape_comp.backward(loss2);

  REQUIRE(!src->grad.empty());
  REQUIRE(!src2->grad.empty());
  for (int i = 0; i < src->numel(); ++i)
    CHECK(src->grad[i] == doctest::Approx(src2->grad[i]).epsilon(1e-11));
  for (int i = 0; i < p.conv_w->numel(); ++i)
    CHECK(p.conv_w->grad[i] == doctest::Approx(p.conv_w->grad[i]).epsilon(1e-11));
  for (int i = 0; i < c_in; ++i) {
    CHECK(p.norm.gamma->grad[i] == doctest::Approx(q.norm.gamma->grad[i]).epsilon(1e-11));
    CHECK(p.norm.beta->grad[i] == doctest::Approx(q.norm.beta->grad[i]).epsilon(1e-11));
  }
}

TEST_CASE("whole-model gradient check on a tiny config") {
  DenseNetConfig cfg = DenseNetConfig::make(8, 2, 3, 4, 0.0);
  cfg.in_channels = 3;
  cfg.in_h = 8;
  cfg.in_w = 8;
  DenseNetModel model = DenseNetModel::init(cfg, 99);
  auto x = random_tensor(Shape::of({2, 3, 8, 8}), 80, false, 0.5);
  CounterRng wrng(81);
  std::vector<double> probe(2 * cfg.nc);
  for (double& v : probe) v = wrng.normal();

  {
    Tape tape;
    auto loss = weighted_sum(&tape, forward(model, &tape, x, Mode::train, 7), probe);
    model.zero_grad();
    tape.backward(loss);
  }
  auto loss_only = [&] {
    return weighted_sum(nullptr, forward(model, nullptr, x, Mode::train, 7), probe)->data[0];
  };
  check_fd(model.stem_w, loss_only, 20, 82);
  check_fd(model.blocks[0][0].conv_w, loss_only, 20, 83);
  check_fd(model.blocks[1][1].norm.gamma, loss_only, 6, 84);
  check_fd(model.blocks[1][0].norm.beta, loss_only, 6, 85);
  check_fd(model.head_w, loss_only, 20, 86);
  check_fd(model.head_b, loss_only, 4, 87);
}
