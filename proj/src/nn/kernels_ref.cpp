#include <algorithm>
#include <cmath>

#include "qmat/nn/kernels.hpp"
#include "qmat/rng.hpp"

// Straightforward serial implementations of the kernel contracts, written
// directly from the layer definitions. These are the ground truth the
// OpenMP kernels are tested against and the baseline for the benchmark.

namespace qmat::nn::kernels::ref {
namespace {

inline std::ptrdiff_t plane_of(int h, int w) { return static_cast<std::ptrdiff_t>(h) * w; }

}  // namespace

void conv3x3_forward(const double* x, std::ptrdiff_t x_bstride, int cin,
                     double* y, std::ptrdiff_t y_bstride, int cout,
                     int batch, int h, int w, const double* weights, bool accumulate) {
  const std::ptrdiff_t plane = plane_of(h, w);
  for (int b = 0; b < batch; ++b)
    for (int oc = 0; oc < cout; ++oc)
      for (int oy = 0; oy < h; ++oy)
        for (int ox = 0; ox < w; ++ox) {
          double acc = 0.0;
          for (int ic = 0; ic < cin; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy + ky - 1, ix = ox + kx - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                const double wv = weights[((oc * cin) + ic) * 9 + ky * 3 + kx];
                acc += wv * x[b * x_bstride + ic * plane + iy * w + ix];
              }
          double* dst = y + b * y_bstride + oc * plane + oy * w + ox;
          *dst = accumulate ? *dst + acc : acc;
        }
}

void conv3x3_backward_input(const double* gy, std::ptrdiff_t gy_bstride, int cout,
                            double* gx, std::ptrdiff_t gx_bstride, int cin,
                            int batch, int h, int w, const double* weights) {
  const std::ptrdiff_t plane = plane_of(h, w);
  // Scatter form: every forward tap contributes its weight to the input cell.
  for (int b = 0; b < batch; ++b)
    for (int ic = 0; ic < cin; ++ic)
      for (int oc = 0; oc < cout; ++oc)
        for (int oy = 0; oy < h; ++oy)
          for (int ox = 0; ox < w; ++ox)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy + ky - 1, ix = ox + kx - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                gx[b * gx_bstride + ic * plane + iy * w + ix] +=
                    weights[((oc * cin) + ic) * 9 + ky * 3 + kx] *
                    gy[b * gy_bstride + oc * plane + oy * w + ox];
              }
}

void conv3x3_backward_weight(const double* x, std::ptrdiff_t x_bstride, int cin,
                             const double* gy, std::ptrdiff_t gy_bstride, int cout,
                             int batch, int h, int w, double* gw) {
  const std::ptrdiff_t plane = plane_of(h, w);
  for (int oc = 0; oc < cout; ++oc)
    for (int ic = 0; ic < cin; ++ic)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double acc = 0.0;
          for (int b = 0; b < batch; ++b)
            for (int oy = 0; oy < h; ++oy)
              for (int ox = 0; ox < w; ++ox) {
                const int iy = oy + ky - 1, ix = ox + kx - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += gy[b * gy_bstride + oc * plane + oy * w + ox] *
                       x[b * x_bstride + ic * plane + iy * w + ix];
              }
          gw[(((oc * cin) + ic) * 3 + ky) * 3 + kx] += acc;
        }
}

void avgpool2x2_forward(const double* x, std::ptrdiff_t x_bstride,
                        double* y, std::ptrdiff_t y_bstride,
                        int batch, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const double* xp = x + b * x_bstride + ch * plane_of(h, w);
          y[b * y_bstride + ch * plane_of(oh, ow) + oy * ow + ox] =
              0.25 * (xp[(2 * oy) * w + 2 * ox] + xp[(2 * oy) * w + 2 * ox + 1] +
                      xp[(2 * oy + 1) * w + 2 * ox] + xp[(2 * oy + 1) * w + 2 * ox + 1]);
        }
}

void avgpool2x2_backward(const double* gy, std::ptrdiff_t gy_bstride,
                         double* gx, std::ptrdiff_t gx_bstride,
                         int batch, int c, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const double g = 0.25 * gy[b * gy_bstride + ch * plane_of(oh, ow) + oy * ow + ox];
          double* xp = gx + b * gx_bstride + ch * plane_of(h, w);
          xp[(2 * oy) * w + 2 * ox] += g;
          xp[(2 * oy) * w + 2 * ox + 1] += g;
          xp[(2 * oy + 1) * w + 2 * ox] += g;
          xp[(2 * oy + 1) * w + 2 * ox + 1] += g;
        }
}

void global_avgpool_forward(const double* x, std::ptrdiff_t x_bstride,
                            double* y, int batch, int c, int h, int w) {
  const std::ptrdiff_t plane = plane_of(h, w);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      const double* xp = x + b * x_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) acc += xp[i];
      y[static_cast<std::ptrdiff_t>(b) * c + ch] = acc * (1.0 / static_cast<double>(plane));
    }
}

void global_avgpool_backward(const double* gy, double* gx, std::ptrdiff_t gx_bstride,
                             int batch, int c, int h, int w) {
  const std::ptrdiff_t plane = plane_of(h, w);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double g = gy[static_cast<std::ptrdiff_t>(b) * c + ch] / static_cast<double>(plane);
      double* xp = gx + b * gx_bstride + ch * plane;
      for (std::ptrdiff_t i = 0; i < plane; ++i) xp[i] += g;
    }
}

void linear_forward(const double* x, const double* w, const double* b,
                    double* y, int batch, int in, int out) {
  for (int bi = 0; bi < batch; ++bi)
    for (int o = 0; o < out; ++o) {
      double acc = b ? b[o] : 0.0;
      for (int i = 0; i < in; ++i)
        acc += w[static_cast<std::ptrdiff_t>(o) * in + i] * x[static_cast<std::ptrdiff_t>(bi) * in + i];
      y[static_cast<std::ptrdiff_t>(bi) * out + o] = acc;
    }
}

void linear_backward_input(const double* gy, const double* w, double* gx,
                           int batch, int in, int out) {
  for (int bi = 0; bi < batch; ++bi)
    for (int o = 0; o < out; ++o)
      for (int i = 0; i < in; ++i)
        gx[static_cast<std::ptrdiff_t>(bi) * in + i] +=
            gy[static_cast<std::ptrdiff_t>(bi) * out + o] * w[static_cast<std::ptrdiff_t>(o) * in + i];
}

void linear_backward_params(const double* gy, const double* x, double* gw, double* gb,
                            int batch, int in, int out) {
  for (int o = 0; o < out; ++o) {
    double gbias = 0.0;
    for (int bi = 0; bi < batch; ++bi) {
      const double g = gy[static_cast<std::ptrdiff_t>(bi) * out + o];
      for (int i = 0; i < in; ++i)
        gw[static_cast<std::ptrdiff_t>(o) * in + i] += g * x[static_cast<std::ptrdiff_t>(bi) * in + i];
      gbias += g;
    }
    if (gb) gb[o] += gbias;
  }
}

void channel_stats(const double* x, std::ptrdiff_t x_bstride,
                   int batch, int c, int h, int w, double* mean, double* var) {
  const std::ptrdiff_t plane = plane_of(h, w);
  const double inv_n = 1.0 / (static_cast<double>(batch) * plane);
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int b = 0; b < batch; ++b)
      for (std::ptrdiff_t i = 0; i < plane; ++i) sum += x[b * x_bstride + ch * plane + i];
    const double mu = sum * inv_n;
    double sq = 0.0;
    for (int b = 0; b < batch; ++b)
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        const double d = x[b * x_bstride + ch * plane + i] - mu;
        sq += d * d;
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
  const std::ptrdiff_t plane = plane_of(h, w);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double a = gamma[ch] * inv_std[ch];
      const double s = beta[ch] - mean[ch] * a;
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        const double pre = a * x[b * x_bstride + ch * plane + i] + s;
        y[b * y_bstride + ch * plane + i] = pre > 0.0 ? pre : 0.0;
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
  const std::ptrdiff_t plane = plane_of(h, w);
  const double inv_n = 1.0 / (static_cast<double>(batch) * plane);
  for (int ch = 0; ch < c; ++ch) {
    const double mu = mean[ch], inv = inv_std[ch];
    const double a = gamma[ch] * inv;
    const double s = beta[ch] - mu * a;
    double s1 = 0.0, s2 = 0.0;
    for (int b = 0; b < batch; ++b)
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        const double xv = x[b * x_bstride + ch * plane + i];
        if (a * xv + s > 0.0) {
          const double g = gy[b * gy_bstride + ch * plane + i];
          s1 += g;
          s2 += g * (xv - mu) * inv;
        }
      }
    dgamma[ch] += s2;
    dbeta[ch] += s1;
    const double m1 = batch_stats ? s1 * inv_n : 0.0;
    const double m2 = batch_stats ? s2 * inv_n : 0.0;
    for (int b = 0; b < batch; ++b)
      for (std::ptrdiff_t i = 0; i < plane; ++i) {
        const double xv = x[b * x_bstride + ch * plane + i];
        if (a * xv + s > 0.0) {
          const double xhat = (xv - mu) * inv;
          gx[b * gx_bstride + ch * plane + i] +=
              a * (gy[b * gy_bstride + ch * plane + i] - m1 - xhat * m2);
        }
      }
  }
}

void dropout_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, std::ptrdiff_t len, std::uint64_t key, double rate) {
  const double scale = 1.0 / (1.0 - rate);
  for (int b = 0; b < batch; ++b)
    for (std::ptrdiff_t i = 0; i < len; ++i)
      y[b * y_bstride + i] =
          dropout_keep(key, static_cast<std::uint64_t>(b) * len + i, rate)
              ? x[b * x_bstride + i] * scale
              : 0.0;
}

void dropout_backward(const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, std::ptrdiff_t len, std::uint64_t key, double rate) {
  const double scale = 1.0 / (1.0 - rate);
  for (int b = 0; b < batch; ++b)
    for (std::ptrdiff_t i = 0; i < len; ++i)
      if (dropout_keep(key, static_cast<std::uint64_t>(b) * len + i, rate))
        gx[b * gx_bstride + i] += gy[b * gy_bstride + i] * scale;
}

}  // namespace qmat::nn::kernels::ref
