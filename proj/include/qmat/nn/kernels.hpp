#pragma once

#include <cstddef>
#include <cstdint>

namespace qmat::nn::kernels {

// Dense feature-map layout is NCHW. Every kernel takes an explicit batch
// stride (elements between consecutive batch items) so callers can address
// channel slices of a wider buffer: element (b,c,y,x) lives at
// base + b*bstride + (c*h + y)*w + x.
//
// The functions in this namespace are the OpenMP-parallel production
// kernels. kernels::ref holds plain serial implementations of the same
// contracts, kept as the comparison target for tests and the benchmark.
// Parallel loops are arranged so every output element is produced by
// exactly one thread with a fixed accumulation order, making results
// independent of the thread count.

// 3x3 convolution, stride 1, zero padding 1, no bias.
// weights layout: (cout, cin, 3, 3). accumulate=false overwrites y.
void conv3x3_forward(const double* x, std::ptrdiff_t x_bstride, int cin,
                     double* y, std::ptrdiff_t y_bstride, int cout,
                     int batch, int h, int w, const double* weights, bool accumulate);

// gx += correlation of gy with the transposed, 180-degree-rotated kernel.
void conv3x3_backward_input(const double* gy, std::ptrdiff_t gy_bstride, int cout,
                            double* gx, std::ptrdiff_t gx_bstride, int cin,
                            int batch, int h, int w, const double* weights);

// gw (cout,cin,3,3) += dL/dweights given upstream gy and forward input x.
void conv3x3_backward_weight(const double* x, std::ptrdiff_t x_bstride, int cin,
                             const double* gy, std::ptrdiff_t gy_bstride, int cout,
                             int batch, int h, int w, double* gw);

// 2x2 average pooling, stride 2. h and w are input dims and must be even.
void avgpool2x2_forward(const double* x, std::ptrdiff_t x_bstride,
                        double* y, std::ptrdiff_t y_bstride,
                        int batch, int c, int h, int w);
void avgpool2x2_backward(const double* gy, std::ptrdiff_t gy_bstride,
                         double* gx, std::ptrdiff_t gx_bstride,
                         int batch, int c, int h, int w);

// Spatial mean per (batch, channel); y is (batch, c) contiguous.
void global_avgpool_forward(const double* x, std::ptrdiff_t x_bstride,
                            double* y, int batch, int c, int h, int w);
void global_avgpool_backward(const double* gy, double* gx, std::ptrdiff_t gx_bstride,
                             int batch, int c, int h, int w);

// y (batch,out) = x (batch,in) * w^T (out,in) + b. b may be null.
void linear_forward(const double* x, const double* w, const double* b,
                    double* y, int batch, int in, int out);
void linear_backward_input(const double* gy, const double* w, double* gx,
                           int batch, int in, int out);
void linear_backward_params(const double* gy, const double* x, double* gw, double* gb,
                            int batch, int in, int out);

// Per-channel mean and population variance over (batch, h, w).
void channel_stats(const double* x, std::ptrdiff_t x_bstride,
                   int batch, int c, int h, int w, double* mean, double* var);

// y = relu(gamma * (x - mean) * inv_std + beta), all per channel.
void bn_relu_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, int c, int h, int w,
                     const double* mean, const double* inv_std,
                     const double* gamma, const double* beta);

// Backward of bn_relu_forward. When batch_stats is true the mean/variance
// were computed from this input and their dependence on x is included;
// otherwise the statistics are treated as constants (eval mode).
// gx accumulates; dgamma/dbeta accumulate.
void bn_relu_backward(const double* x, std::ptrdiff_t x_bstride,
                      const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, int c, int h, int w,
                      const double* mean, const double* inv_std,
                      const double* gamma, const double* beta,
                      double* dgamma, double* dbeta, bool batch_stats);

// Inverted dropout over a (batch, len)-shaped slice. The mask is a pure
// function of (key, element index), so forward and backward agree without
// storing it. y = x / (1-rate) where kept, 0 where dropped.
void dropout_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, std::ptrdiff_t len, std::uint64_t key, double rate);
void dropout_backward(const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, std::ptrdiff_t len, std::uint64_t key, double rate);

bool dropout_keep(std::uint64_t key, std::uint64_t index, double rate);

namespace ref {

void conv3x3_forward(const double* x, std::ptrdiff_t x_bstride, int cin,
                     double* y, std::ptrdiff_t y_bstride, int cout,
                     int batch, int h, int w, const double* weights, bool accumulate);
void conv3x3_backward_input(const double* gy, std::ptrdiff_t gy_bstride, int cout,
                            double* gx, std::ptrdiff_t gx_bstride, int cin,
                            int batch, int h, int w, const double* weights);
void conv3x3_backward_weight(const double* x, std::ptrdiff_t x_bstride, int cin,
                             const double* gy, std::ptrdiff_t gy_bstride, int cout,
                             int batch, int h, int w, double* gw);
void avgpool2x2_forward(const double* x, std::ptrdiff_t x_bstride,
                        double* y, std::ptrdiff_t y_bstride,
                        int batch, int c, int h, int w);
void avgpool2x2_backward(const double* gy, std::ptrdiff_t gy_bstride,
                         double* gx, std::ptrdiff_t gx_bstride,
                         int batch, int c, int h, int w);
void global_avgpool_forward(const double* x, std::ptrdiff_t x_bstride,
                            double* y, int batch, int c, int h, int w);
void global_avgpool_backward(const double* gy, double* gx, std::ptrdiff_t gx_bstride,
                             int batch, int c, int h, int w);
void linear_forward(const double* x, const double* w, const double* b,
                    double* y, int batch, int in, int out);
void linear_backward_input(const double* gy, const double* w, double* gx,
                           int batch, int in, int out);
void linear_backward_params(const double* gy, const double* x, double* gw, double* gb,
                            int batch, int in, int out);
void channel_stats(const double* x, std::ptrdiff_t x_bstride,
                   int batch, int c, int h, int w, double* mean, double* var);
void bn_relu_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, int c, int h, int w,
                     const double* mean, const double* inv_std,
                     const double* gamma, const double* beta);
void bn_relu_backward(const double* x, std::ptrdiff_t x_bstride,
                      const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, int c, int h, int w,
                      const double* mean, const double* inv_std,
                      const double* gamma, const double* beta,
                      double* dgamma, double* dbeta, bool batch_stats);
void dropout_forward(const double* x, std::ptrdiff_t x_bstride,
                     double* y, std::ptrdiff_t y_bstride,
                     int batch, std::ptrdiff_t len, std::uint64_t key, double rate);
void dropout_backward(const double* gy, std::ptrdiff_t gy_bstride,
                      double* gx, std::ptrdiff_t gx_bstride,
                      int batch, std::ptrdiff_t len, std::uint64_t key, double rate);

}  // namespace ref

}  // namespace qmat::nn::kernels
