#include "wisppn/kernels_serial.hpp"

#include <cmath>

namespace wisppn::ref {

void gemm(const double* a, const double* b, double* c, int m, int k, int n,
          bool accumulate) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = accumulate ? c[static_cast<std::size_t>(i) * n + j] : 0.0;
            for (int p = 0; p < k; ++p)
                acc += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(p) * n + j];
            c[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
}

static int out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

void conv2d_forward(const double* x, const double* w, const double* bias, double* y,
                    int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                    int stride, int pad) {
    const int oh = out_extent(h, kh, stride, pad);
    const int ow = out_extent(wd, kw, stride, pad);
    for (int img = 0; img < n; ++img) {
        const double* xi = x + static_cast<std::size_t>(img) * c_in * h * wd;
        double* yi = y + static_cast<std::size_t>(img) * c_out * oh * ow;
        for (int o = 0; o < c_out; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int c = 0; c < c_in; ++c) {
                        for (int u = 0; u < kh; ++u) {
                            const int iy = oy * stride + u - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int v = 0; v < kw; ++v) {
                                const int ix = ox * stride + v - pad;
                                if (ix < 0 || ix >= wd) continue;
                                acc += xi[(static_cast<std::size_t>(c) * h + iy) * wd + ix] *
                                       w[((static_cast<std::size_t>(o) * c_in + c) * kh + u) * kw + v];
                            }
                        }
                    }
                    if (bias) acc += bias[o];
                    yi[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
}

void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                           int stride, int pad) {
    const int oh = out_extent(h, kh, stride, pad);
    const int ow = out_extent(wd, kw, stride, pad);
    for (int img = 0; img < n; ++img) {
        const double* dyi = dy + static_cast<std::size_t>(img) * c_out * oh * ow;
        double* dxi = dx + static_cast<std::size_t>(img) * c_in * h * wd;
        for (int o = 0; o < c_out; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = dyi[(static_cast<std::size_t>(o) * oh + oy) * ow + ox];
                    for (int c = 0; c < c_in; ++c) {
                        for (int u = 0; u < kh; ++u) {
                            const int iy = oy * stride + u - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int v = 0; v < kw; ++v) {
                                const int ix = ox * stride + v - pad;
                                if (ix < 0 || ix >= wd) continue;
                                dxi[(static_cast<std::size_t>(c) * h + iy) * wd + ix] +=
                                    g * w[((static_cast<std::size_t>(o) * c_in + c) * kh + u) * kw + v];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(const double* x, const double* dy, double* dw, double* db,
                            int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                            int stride, int pad) {
    const int oh = out_extent(h, kh, stride, pad);
    const int ow = out_extent(wd, kw, stride, pad);
    for (int img = 0; img < n; ++img) {
        const double* xi = x + static_cast<std::size_t>(img) * c_in * h * wd;
        const double* dyi = dy + static_cast<std::size_t>(img) * c_out * oh * ow;
        for (int o = 0; o < c_out; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = dyi[(static_cast<std::size_t>(o) * oh + oy) * ow + ox];
                    if (db) db[o] += g;
                    if (!dw) continue;
                    for (int c = 0; c < c_in; ++c) {
                        for (int u = 0; u < kh; ++u) {
                            const int iy = oy * stride + u - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int v = 0; v < kw; ++v) {
                                const int ix = ox * stride + v - pad;
                                if (ix < 0 || ix >= wd) continue;
                                dw[((static_cast<std::size_t>(o) * c_in + c) * kh + u) * kw + v] +=
                                    g * xi[(static_cast<std::size_t>(c) * h + iy) * wd + ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

void batchnorm_stats(const double* x, int n, int c, int h, int w,
                     double* mean, double* var) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (int img = 0; img < n; ++img) {
            const double* p = x + (static_cast<std::size_t>(img) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        const double mu = sum / static_cast<double>(m);
        double sq = 0.0;
        for (int img = 0; img < n; ++img) {
            const double* p = x + (static_cast<std::size_t>(img) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = p[i] - mu;
                sq += d * d;
            }
        }
        mean[ch] = mu;
        var[ch] = sq / static_cast<double>(m);
    }
}

void batchnorm_forward(const double* x, const double* mean, const double* var,
                       const double* gamma, const double* beta, double eps, double* y,
                       int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int img = 0; img < n; ++img) {
        for (int ch = 0; ch < c; ++ch) {
            const double inv = 1.0 / std::sqrt(var[ch] + eps);
            const double g = gamma[ch];
            const double b = beta[ch];
            const double mu = mean[ch];
            const double* xp = x + (static_cast<std::size_t>(img) * c + ch) * plane;
            double* yp = y + (static_cast<std::size_t>(img) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                yp[i] = ((xp[i] - mu) * inv) * g + b;
        }
    }
}

void batchnorm_backward(const double* x, const double* dy, const double* mean,
                        const double* var, const double* gamma, double eps,
                        bool stats_from_batch, double* dx, double* dgamma, double* dbeta,
                        int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(static_cast<std::size_t>(n) * plane);
    for (int ch = 0; ch < c; ++ch) {
        const double inv = 1.0 / std::sqrt(var[ch] + eps);
        const double mu = mean[ch];
        double sum_dy = 0.0;
        double sum_dy_xh = 0.0;
        for (int img = 0; img < n; ++img) {
            const double* xp = x + (static_cast<std::size_t>(img) * c + ch) * plane;
            const double* dp = dy + (static_cast<std::size_t>(img) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dp[i];
                sum_dy_xh += dp[i] * ((xp[i] - mu) * inv);
            }
        }
        if (dgamma) dgamma[ch] += sum_dy_xh;
        if (dbeta) dbeta[ch] += sum_dy;
        if (!dx) continue;
        const double g = gamma[ch];
        for (int img = 0; img < n; ++img) {
            const double* xp = x + (static_cast<std::size_t>(img) * c + ch) * plane;
            const double* dp = dy + (static_cast<std::size_t>(img) * c + ch) * plane;
            double* op = dx + (static_cast<std::size_t>(img) * c + ch) * plane;
            if (stats_from_batch) {
                for (std::size_t i = 0; i < plane; ++i) {
                    const double xh = (xp[i] - mu) * inv;
                    op[i] += g * inv * (dp[i] - sum_dy / m - xh * (sum_dy_xh / m));
                }
            } else {
                for (std::size_t i = 0; i < plane; ++i)
                    op[i] += dp[i] * g * inv;
            }
        }
    }
}

void relu_forward(const double* x, double* y, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* y, const double* dy, double* dx, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i)
        if (y[i] > 0.0) dx[i] += dy[i];
}

namespace {

struct Taps {
    int lo, hi;
    double t;
};

Taps taps(int dst, int in, int out) {
    const double src = (static_cast<double>(dst) + 0.5) * (static_cast<double>(in) / out) - 0.5;
    const int lo0 = static_cast<int>(std::floor(src));
    Taps r;
    r.t = src - static_cast<double>(lo0);
    r.lo = lo0 < 0 ? 0 : (lo0 > in - 1 ? in - 1 : lo0);
    const int hi0 = lo0 + 1;
    r.hi = hi0 < 0 ? 0 : (hi0 > in - 1 ? in - 1 : hi0);
    return r;
}

}  // namespace

void bilinear_forward(const double* x, double* y, int planes, int ih, int iw,
                      int oh, int ow) {
    for (int p = 0; p < planes; ++p) {
        const double* xp = x + static_cast<std::size_t>(p) * ih * iw;
        double* yp = y + static_cast<std::size_t>(p) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const Taps ty = taps(oy, ih, oh);
            for (int ox = 0; ox < ow; ++ox) {
                const Taps tx = taps(ox, iw, ow);
                const double v00 = xp[static_cast<std::size_t>(ty.lo) * iw + tx.lo];
                const double v01 = xp[static_cast<std::size_t>(ty.lo) * iw + tx.hi];
                const double v10 = xp[static_cast<std::size_t>(ty.hi) * iw + tx.lo];
                const double v11 = xp[static_cast<std::size_t>(ty.hi) * iw + tx.hi];
                const double top = v00 * (1.0 - tx.t) + v01 * tx.t;
                const double bot = v10 * (1.0 - tx.t) + v11 * tx.t;
                yp[static_cast<std::size_t>(oy) * ow + ox] = top * (1.0 - ty.t) + bot * ty.t;
            }
        }
    }
}

void bilinear_backward(const double* dy, double* dx, int planes, int ih, int iw,
                       int oh, int ow) {
    for (int p = 0; p < planes; ++p) {
        const double* dp = dy + static_cast<std::size_t>(p) * oh * ow;
        double* xp = dx + static_cast<std::size_t>(p) * ih * iw;
        for (int oy = 0; oy < oh; ++oy) {
            const Taps ty = taps(oy, ih, oh);
            for (int ox = 0; ox < ow; ++ox) {
                const Taps tx = taps(ox, iw, ow);
                const double g = dp[static_cast<std::size_t>(oy) * ow + ox];
                xp[static_cast<std::size_t>(ty.lo) * iw + tx.lo] += g * (1.0 - tx.t) * (1.0 - ty.t);
                xp[static_cast<std::size_t>(ty.lo) * iw + tx.hi] += g * tx.t * (1.0 - ty.t);
                xp[static_cast<std::size_t>(ty.hi) * iw + tx.lo] += g * (1.0 - tx.t) * ty.t;
                xp[static_cast<std::size_t>(ty.hi) * iw + tx.hi] += g * tx.t * ty.t;
            }
        }
    }
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t count,
                 double lr, double beta1, double beta2, double eps, long step) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < count; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace wisppn::ref
