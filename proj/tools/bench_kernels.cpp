// Times the OpenMP kernels against the serial reference implementations on
// layer shapes the network actually uses. Run with --quick for a fast pass.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "qmat/nn/kernels.hpp"
#include "qmat/rng.hpp"

namespace K = qmat::nn::kernels;
using qmat::CounterRng;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t key) {
  std::vector<double> v(n);
  CounterRng rng(key);
  for (double& x : v) x = rng.normal();
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double ref_ms, double omp_ms) {
  std::printf("%-28s ref %9.2f ms   omp %9.2f ms   speedup %5.2fx\n", name, ref_ms,
              omp_ms, ref_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const int B = quick ? 4 : 32;
  const int reps = quick ? 1 : 3;
  std::printf("threads: %d, batch: %d\n", omp_get_max_threads(), B);

  struct ConvCase {
    const char* name;
    int cin, cout, h, w;
  };
  const ConvCase cases[] = {
      {"conv 24->12 @64x64", 24, 12, 64, 64},
      {"conv 156->12 @64x64", 156, 12, 64, 64},
      {"conv 288->12 @32x32", 288, 12, 32, 32},
  };

  for (const ConvCase& c : cases) {
    const std::ptrdiff_t xsz = std::ptrdiff_t(B) * c.cin * c.h * c.w;
    const std::ptrdiff_t ysz = std::ptrdiff_t(B) * c.cout * c.h * c.w;
    const auto x = random_vec(xsz, 1);
    const auto w = random_vec(std::size_t(c.cout) * c.cin * 9, 2);
    const auto gy = random_vec(ysz, 3);
    std::vector<double> y(ysz), gx(xsz), gw(w.size());
    const std::ptrdiff_t xbs = std::ptrdiff_t(c.cin) * c.h * c.w;
    const std::ptrdiff_t ybs = std::ptrdiff_t(c.cout) * c.h * c.w;

    char label[64];
    std::snprintf(label, sizeof(label), "%s fwd", c.name);
    report(label,
           time_ms([&] { K::ref::conv3x3_forward(x.data(), xbs, c.cin, y.data(), ybs,
                                                 c.cout, B, c.h, c.w, w.data(), false); },
                   1),
           time_ms([&] { K::conv3x3_forward(x.data(), xbs, c.cin, y.data(), ybs, c.cout,
                                            B, c.h, c.w, w.data(), false); },
                   reps));

    std::snprintf(label, sizeof(label), "%s bwd_in", c.name);
    report(label,
           time_ms([&] {
             std::fill(gx.begin(), gx.end(), 0.0);
             K::ref::conv3x3_backward_input(gy.data(), ybs, c.cout, gx.data(), xbs, c.cin,
                                            B, c.h, c.w, w.data());
           }, 1),
           time_ms([&] {
             std::fill(gx.begin(), gx.end(), 0.0);
             K::conv3x3_backward_input(gy.data(), ybs, c.cout, gx.data(), xbs, c.cin, B,
                                       c.h, c.w, w.data());
           }, reps));

    std::snprintf(label, sizeof(label), "%s bwd_w", c.name);
    report(label,
           time_ms([&] {
             std::fill(gw.begin(), gw.end(), 0.0);
             K::ref::conv3x3_backward_weight(x.data(), xbs, c.cin, gy.data(), ybs, c.cout,
                                             B, c.h, c.w, gw.data());
           }, 1),
           time_ms([&] {
             std::fill(gw.begin(), gw.end(), 0.0);
             K::conv3x3_backward_weight(x.data(), xbs, c.cin, gy.data(), ybs, c.cout, B,
                                        c.h, c.w, gw.data());
           }, reps));
  }

  {
    const int C = 168, H = 64, W = 64;
    const std::ptrdiff_t bs = std::ptrdiff_t(C) * H * W;
    const auto x = random_vec(std::size_t(B) * bs, 4);
    std::vector<double> mean(C), var(C), y(x.size());
    std::vector<double> gamma(C, 1.0), beta(C, 0.0), inv(C, 1.0);

    report("channel_stats 168 @64x64",
           time_ms([&] { K::ref::channel_stats(x.data(), bs, B, C, H, W, mean.data(),
                                               var.data()); }, 1),
           time_ms([&] { K::channel_stats(x.data(), bs, B, C, H, W, mean.data(),
                                          var.data()); }, reps));
    report("bn_relu fwd 168 @64x64",
           time_ms([&] { K::ref::bn_relu_forward(x.data(), bs, y.data(), bs, B, C, H, W,
                                                 mean.data(), inv.data(), gamma.data(),
                                                 beta.data()); }, 1),
           time_ms([&] { K::bn_relu_forward(x.data(), bs, y.data(), bs, B, C, H, W,
                                            mean.data(), inv.data(), gamma.data(),
                                            beta.data()); }, reps));
    report("avgpool2x2 168 @64x64",
           time_ms([&] { K::ref::avgpool2x2_forward(x.data(), bs, y.data(), bs / 4, B, C,
                                                    H, W); }, 1),
           time_ms([&] { K::avgpool2x2_forward(x.data(), bs, y.data(), bs / 4, B, C, H,
                                               W); }, reps));
  }

  return 0;
}
