#pragma once

#include <cstddef>

namespace wisppn::ref {

// Serial reference kernels. Plain nested loops, no threading, no blocking.
// These are the ground truth the OpenMP kernels are tested against and the
// baseline side of the kernel benchmark. Layouts match the fast kernels:
// activations NCHW, weights [C_out][C_in][kh][kw], everything row-major f64.

void gemm(const double* a, const double* b, double* c, int m, int k, int n,
          bool accumulate);

void conv2d_forward(const double* x, const double* w, const double* bias, double* y,
                    int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                    int stride, int pad);

void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                           int stride, int pad);

void conv2d_backward_params(const double* x, const double* dy, double* dw, double* db,
                            int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                            int stride, int pad);

// Two-pass per-channel mean and population variance over (N, H, W).
void batchnorm_stats(const double* x, int n, int c, int h, int w,
                     double* mean, double* var);

void batchnorm_forward(const double* x, const double* mean, const double* var,
                       const double* gamma, const double* beta, double eps, double* y,
                       int n, int c, int h, int w);

void batchnorm_backward(const double* x, const double* dy, const double* mean,
                        const double* var, const double* gamma, double eps,
                        bool stats_from_batch, double* dx, double* dgamma, double* dbeta,
                        int n, int c, int h, int w);

void relu_forward(const double* x, double* y, std::size_t count);

// dx += dy where the stored output is positive.
void relu_backward(const double* y, const double* dy, double* dx, std::size_t count);

// Half-pixel source mapping: src = (dst + 0.5) * (in / out) - 0.5, clamped.
void bilinear_forward(const double* x, double* y, int planes, int ih, int iw,
                      int oh, int ow);

void bilinear_backward(const double* dy, double* dx, int planes, int ih, int iw,
                       int oh, int ow);

void adam_update(double* p, const double* g, double* m, double* v, std::size_t count,
                 double lr, double beta1, double beta2, double eps, long step);

}  // namespace wisppn::ref
