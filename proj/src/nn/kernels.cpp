#include "qmat/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qmat/rng.hpp"

namespace qmat::nn::kernels {
namespace {

// Valid output-row range for a kernel row offset dy = ky-1: the input row
// oy+dy must land in [0, h).
inline void row_range(int k, int h, int* lo, int* hi) {
  *lo = std::max(0, 1 - k);
  *hi = std::min(h, h + 1 - k);
}

}  // namespace

void conv3x3_forward(const double* x, std::ptrdiff_t x_bstride, int cin,
                     double* y, std::ptrdiff_t y_bstride, int cout,
                     int batch, int h, int w, const double* weights, bool accumulate) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (int oc = 0; oc < cout; ++oc) {
      double* ybase = y + b * y_bstride + oc * plane;
      if (!accumulate) std::fill(ybase, ybase + plane, 0.0);
      const double* xb = x + b * x_bstride;
      for (int ic = 0; ic < cin; ++ic) {
        const double* xplane = xb + ic * plane;
        const double* wk = weights + ((oc * cin) + ic) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          int oy0, oy1;
          row_range(ky, h, &oy0, &oy1);
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = wk[ky * 3 + kx];
            int ox0, ox1;
            row_range(kx, w, &ox0, &ox1);
            for (int oy = oy0; oy < oy1; ++oy) {
              double* __restrict__ dst = ybase + static_cast<std::ptrdiff_t>(oy) * w;
              const double* __restrict__ src =
                  xplane + static_cast<std::ptrdiff_t>(oy + ky - 1) * w + (kx - 1);
              for (int ox = ox0; ox < ox1; ++ox) dst[ox] += wv * src[ox];
            }
          }
        }
      }
    }
  }
}

void conv3x3_backward_input(const double* gy, std::ptrdiff_t gy_bstride, int cout,
                            double* gx, std::ptrdiff_t gx_bstride, int cin,
                            int batch, int h, int w, const double* weights) {
  // dL/dx is a 3x3 convolution of gy with the kernel transposed across the
  // channel axes and rotated 180 degrees spatially.
  std::vector<double> rotated(static_cast<std::size_t>(cin) * cout * 9);
  for (int oc = 0; oc < cout; ++oc)
    for (int ic = 0; ic < cin; ++ic)
      for (int k = 0; k < 9; ++k)
        rotated[((ic * cout) + oc) * 9 + (8 - k)] = weights[((oc * cin) + ic) * 9 + k];
  conv3x3_forward(gy, gy_bstride, cout, gx, gx_bstride, cin, batch, h, w,
                  rotated.data(), /*accumulate=*/true);
}

void conv3x3_backward_weight(const double* x, std::ptrdiff_t x_bstride, int cin,
                             const double* gy, std::ptrdiff_t gy_bstride, int cout,
                             int batch, int h, int w, double* gw) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  constexpr int kLanes = 8;  // fixed lane-blocked accumulation order
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    for (int ic = 0; ic < cin; ++ic) {
      for (int ky = 0; ky < 3; ++ky) {
        int oy0, oy1;
        row_range(ky, h, &oy0, &oy1);
        for (int kx = 0; kx < 3; ++kx) {
          int ox0, ox1;
          row_range(kx, w, &ox0, &ox1);
          const int n = ox1 - ox0;
          const int vec_n = n - n % kLanes;
          double lanes[kLanes] = {0};
          double tail = 0.0;
          for (int b = 0; b < batch; ++b) {
            const double* gplane = gy + b * gy_bstride + oc * plane;
            const double* xplane = x + b * x_bstride + ic * plane;
            for (int oy = oy0; oy < oy1; ++oy) {
              const double* __restrict__ g = gplane + static_cast<std::ptrdiff_t>(oy) * w + ox0;
              const double* __restrict__ s =
                  xplane + static_cast<std::ptrdiff_t>(oy + ky - 1) * w + (kx - 1) + ox0;
              for (int i = 0; i < vec_n; i += kLanes)
                for (int l = 0; l < kLanes; ++l) lanes[l] += g[i + l] * s[i + l];
              for (int i = vec_n; i < n; ++i) tail += g[i] * s[i];
            }
          }
          double acc = tail;
          for (int l = 0; l < kLanes; ++l) acc += lanes[l];
          gw[(((oc * cin) + ic) * 3 + ky) * 3 + kx] += acc;
        }
      }
    }
  }
}

void avgpool2x2_forward(const double* x, std::ptrdiff_t x_bstride,
                        double* y, std::ptrdiff_t y_bstride,
                        int batch, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(h) * w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x + b * x_bstride + ch * in_plane;
      double* yp = y + b * y_bstride + ch * out_plane;
      for (int oy = 0; oy < oh; ++oy) {
        const double* r0 = xp + static_cast<std::ptrdiff_t>(2 * oy) * w;
        const double* r1 = r0 + w;
        double* dst = yp + static_cast<std::ptrdiff_t>(oy) * ow;
        for (int ox = 0; ox < ow; ++ox)
          dst[ox] = 0.25 * (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]);
      }
    }
  }
}

void avgpool2x2_backward(const double* gy, std::ptrdiff_t gy_bstride,
                         double* gx, std::ptrdiff_t gx_bstride,
                         int batch, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  const std::ptrdiff_t in_plane = static_cast<std::ptrdiff_t>(h) * w;
  const std::ptrdiff_t out_plane = static_cast<std::ptrdiff_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gp = gy + b * gy_bstride + ch * out_plane;
      double* xp = gx + b * gx_bstride + ch * in_plane;
      for (int oy = 0; oy < oh; ++oy) {
        const double* src = gp + static_cast<std::ptrdiff_t>(oy) * ow;
        double* r0 = xp + static_cast<std::ptrdiff_t>(2 * oy) * w;
        double* r1 = r0 + w;
        for (int ox = 0; ox < ow; ++ox) {
          const double g = 0.25 * src[ox];
          r0[2 * ox] += g;
          r0[2 * ox + 1] += g;
          r1[2 * ox] += g;
          r1[2 * ox + 1] += g;
        }
      }
    }
  }
}

void global_avgpool_forward(const double* x, std::ptrdiff_t x_bstride,
                            double* y, int batch, int c, int h, int w) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const double scale = 1.0 / static_cast<double>(plane);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x + b * x_bstride + ch * plane;
      double acc = 0.0;
      for (std::ptrdiff_t i = 0; i < plane; ++i) acc += xp[i];
      y[static_cast<std::ptrdiff_t>(b) * c + ch] = acc * scale;
    }
  }
}

void global_avgpool_backward(const double* gy, double* gx, std::ptrdiff_t gx_bstride,
                             int batch, int c, int h, int w) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const double scale = 1.0 / static_cast<double>(plane);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double g = gy[static_cast<std::ptrdiff_t>(b) * c + ch] * scale;
      double* xp = gx + b * gx_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) xp[i] += g;
    }
  }
}

void linear_forward(const double* x, const double* w, const double* b,
                    double* y, int batch, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < batch; ++bi) {
    const double* xr = x + static_cast<std::ptrdiff_t>(bi) * in;
    double* yr = y + static_cast<std::ptrdiff_t>(bi) * out;
    for (int o = 0; o < out; ++o) {
      const double* wr = w + static_cast<std::ptrdiff_t>(o) * in;
      double acc = b ? b[o] : 0.0;
      for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
}

void linear_backward_input(const double* gy, const double* w, double* gx,
                           int batch, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < batch; ++bi) {
    const double* gr = gy + static_cast<std::ptrdiff_t>(bi) * out;
    double* xr = gx + static_cast<std::ptrdiff_t>(bi) * in;
    for (int o = 0; o < out; ++o) {
      const double g = gr[o];
      const double* wr = w + static_cast<std::ptrdiff_t>(o) * in;
      for (int i = 0; i < in; ++i) xr[i] += g * wr[i];
    }
  }
}

void linear_backward_params(const double* gy, const double* x, double* gw, double* gb,
                            int batch, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    double* wr = gw + static_cast<std::ptrdiff_t>(o) * in;
    double gbias = 0.0;
    for (int bi = 0; bi < batch; ++bi) {
      const double g = gy[static_cast<std::ptrdiff_t>(bi) * out + o];
      const double* xr = x + static_cast<std::ptrdiff_t>(bi) * in;
      for (int i = 0; i < in; ++i) wr[i] += g * xr[i];
      gbias += g;
    }
    if (gb) gb[o] += gbias;
  }
}

void channel_stats(const double* x, std::ptrdiff_t x_bstride,
                   int batch, int c, int h, int w, double* mean, double* var) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const double inv_n = 1.0 / (static_cast<double>(batch) * plane);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* xp = x + b * x_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) sum += xp[i];
    }
    const double mu = sum * inv_n;
    double sq = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* xp = x + b * x_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        const double d = xp[i] - mu;
        sq += d * d;
      }
    }
    mean[ch] = mu;
    var[ch] = sq * inv_n;
  }
}

void bn_relu_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, int c, int h, int w,
                     const double* mean, const double* inv_std,
                     const double* gamma, const double* beta) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double a = gamma[ch] * inv_std[ch];
      const double s = beta[ch] - mean[ch] * a;
      const double* __restrict__ xp = x + b * x_bstride + ch * plane;
      double* __restrict__ yp = y + b * y_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        const double pre = a * xp[i] + s;
        yp[i] = pre > 0.0 ? pre : 0.0;
      }
    }
  }
}

void bn_relu_backward(const double* x, std::ptrdiff_t x_bstride,
                      const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, int c, int h, int w,
                      const double* mean, const double* inv_std,
                      const double* gamma, const double* beta,
                      double* dgamma, double* dbeta, bool batch_stats) {
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const double inv_n = 1.0 / (static_cast<double>(batch) * plane);
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const double mu = mean[ch], inv = inv_std[ch];
    const double a = gamma[ch] * inv;
    const double s = beta[ch] - mu * a;
    // First pass: sums of the rectifier-masked upstream gradient and of its
    // product with the normalized input.
    double s1 = 0.0, s2 = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* xp = x + b * x_bstride + ch * plane;
      const double* gp = gy + b * gy_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        if (a * xp[i] + s > 0.0) {
          const double g = gp[i];
          s1 += g;
          s2 += g * (xp[i] - mu) * inv;
        }
      }
    }
    dgamma[ch] += s2;
    dbeta[ch] += s1;
    const double m1 = batch_stats ? s1 * inv_n : 0.0;
    const double m2 = batch_stats ? s2 * inv_n : 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* xp = x + b * x_bstride + ch * plane;
      const double* gp = gy + b * gy_bstride + ch * plane;
      double* op = gx + b * gx_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        if (a * xp[i] + s > 0.0) {
          const double xhat = (xp[i] - mu) * inv;
          op[i] += a * (gp[i] - m1 - xhat * m2);
        }
      }
    }
  }
}

bool dropout_keep(std::uint64_t key, std::uint64_t index, double rate) {
  return CounterRng(key).at(index) >= static_cast<std::uint64_t>(rate * 18446744073709551616.0);
}

void dropout_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, std::ptrdiff_t len, std::uint64_t key, double rate) {
  const double scale = 1.0 / (1.0 - rate);
  const CounterRng rng(key);
  const std::uint64_t threshold = static_cast<std::uint64_t>(rate * 18446744073709551616.0);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    const double* xp = x + b * x_bstride;
    double* yp = y + b * y_bstride;
    const std::uint64_t base = static_cast<std::uint64_t>(b) * len;
    for (std::ptrdiff_t i = 0; i < len; ++i)
      yp[i] = rng.at(base + i) >= threshold ? xp[i] * scale : 0.0;
  }
}

void dropout_backward(const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, std::ptrdiff_t len, std::uint64_t key, double rate) {
  const double scale = 1.0 / (1.0 - rate);
  const CounterRng rng(key);
  const std::uint64_t threshold = static_cast<std::uint64_t>(rate * 18446744073709551616.0);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    const double* gp = gy + b * gy_bstride;
    double* xp = gx + b * gx_bstride;
    const std::uint64_t base = static_cast<std::uint64_t>(b) * len;
    for (std::ptrdiff_t i = 0; i < len; ++i)
      if (rng.at(base + i) >= threshold) xp[i] += gp[i] * scale;
  }
}

}  // namespace qmat::nn::kernels
