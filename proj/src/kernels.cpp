#include "wisppn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wisppn::kernels {

namespace {

constexpr int kTile = 512;  // im2col columns per task

int out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

// Accumulator-register microkernel: MR rows of A against NW columns of B,
// full K reduction in ascending order (one chain per output element).
template <int MR, int NW>
void micro(const double* a, int lda, const double* b, int ldb, double* c, int ldc,
           int k, bool accumulate, const double* bias, int row0) {
    double acc[MR][NW];
    for (int r = 0; r < MR; ++r)
        for (int j = 0; j < NW; ++j) acc[r][j] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double* brow = b + static_cast<std::size_t>(p) * ldb;
        for (int r = 0; r < MR; ++r) {
            const double av = a[static_cast<std::size_t>(r) * lda + p];
            for (int j = 0; j < NW; ++j) acc[r][j] += av * brow[j];
        }
    }
    for (int r = 0; r < MR; ++r) {
        double* crow = c + static_cast<std::size_t>(r) * ldc;
        const double bv = bias ? bias[row0 + r] : 0.0;
        if (accumulate) {
            for (int j = 0; j < NW; ++j) crow[j] += acc[r][j] + bv;
        } else {
            for (int j = 0; j < NW; ++j) crow[j] = acc[r][j] + bv;
        }
    }
}

template <int MR>
void micro_edge(const double* a, int lda, const double* b, int ldb, double* c, int ldc,
                int k, int nw, bool accumulate, const double* bias, int row0) {
    for (int r = 0; r < MR; ++r) {
        const double* arow = a + static_cast<std::size_t>(r) * lda;
        double* crow = c + static_cast<std::size_t>(r) * ldc;
        for (int j = 0; j < nw; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * b[static_cast<std::size_t>(p) * ldb + j];
            if (bias) acc += bias[row0 + r];
            if (accumulate)
                crow[j] += acc;
            else
                crow[j] = acc;
        }
    }
}

// C[M x N] (+)= A[M x K] * B[K x N], with leading dimensions. Serial; callers
// parallelize over disjoint C blocks.
void gemm_block(const double* a, int lda, const double* b, int ldb, double* c, int ldc,
                int m, int k, int n, bool accumulate, const double* bias, int row0) {
    constexpr int NW = 32;
    for (int m0 = 0; m0 < m; m0 += 4) {
        const int mr = std::min(4, m - m0);
        const double* ab = a + static_cast<std::size_t>(m0) * lda;
        double* cb = c + static_cast<std::size_t>(m0) * ldc;
        int j0 = 0;
        for (; j0 + NW <= n; j0 += NW) {
            switch (mr) {
                case 4: micro<4, NW>(ab, lda, b + j0, ldb, cb + j0, ldc, k, accumulate, bias, row0 + m0); break;
                case 3: micro<3, NW>(ab, lda, b + j0, ldb, cb + j0, ldc, k, accumulate, bias, row0 + m0); break;
                case 2: micro<2, NW>(ab, lda, b + j0, ldb, cb + j0, ldc, k, accumulate, bias, row0 + m0); break;
                default: micro<1, NW>(ab, lda, b + j0, ldb, cb + j0, ldc, k, accumulate, bias, row0 + m0); break;
            }
        }
        if (j0 < n) {
            switch (mr) {
                case 4: micro_edge<4>(ab, lda, b + j0, ldb, cb + j0, ldc, k, n - j0, accumulate, bias, row0 + m0); break;
                case 3: micro_edge<3>(ab, lda, b + j0, ldb, cb + j0, ldc, k, n - j0, accumulate, bias, row0 + m0); break;
                case 2: micro_edge<2>(ab, lda, b + j0, ldb, cb + j0, ldc, k, n - j0, accumulate, bias, row0 + m0); break;
                default: micro_edge<1>(ab, lda, b + j0, ldb, cb + j0, ldc, k, n - j0, accumulate, bias, row0 + m0); break;
            }
        }
    }
}

// Writes im2col rows k = (c*kh + u)*kw + v for output positions [p0, p0+pw).
// Out-of-image taps become zeros, which contribute exact no-ops to the sums.
void im2col_chunk(const double* x, double* col, int p0, int pw,
                  int c_in, int h, int wd, int kh, int kw, int stride, int pad, int ow) {
    for (int c = 0; c < c_in; ++c) {
        const double* xc = x + static_cast<std::size_t>(c) * h * wd;
        for (int u = 0; u < kh; ++u) {
            for (int v = 0; v < kw; ++v) {
                double* row = col + (static_cast<std::size_t>((c * kh + u) * kw + v)) * pw;
                for (int j = 0; j < pw; ++j) {
                    const int p = p0 + j;
                    const int oy = p / ow;
                    const int ox = p - oy * ow;
                    const int iy = oy * stride + u - pad;
                    const int ix = ox * stride + v - pad;
                    row[j] = (iy >= 0 && iy < h && ix >= 0 && ix < wd)
                                 ? xc[static_cast<std::size_t>(iy) * wd + ix]
                                 : 0.0;
                }
            }
        }
    }
}

void conv_forward_gemm(const double* x, const double* w, const double* bias, double* y,
                       int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                       int stride, int pad, bool accumulate) {
    const int oh = out_extent(h, kh, stride, pad);
    const int ow = out_extent(wd, kw, stride, pad);
    const int p_total = oh * ow;
    const int k = c_in * kh * kw;
    const int nchunks = (p_total + kTile - 1) / kTile;

#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int img = 0; img < n; ++img) {
        for (int chunk = 0; chunk < nchunks; ++chunk) {
            const int p0 = chunk * kTile;
            const int pw = std::min(kTile, p_total - p0);
            std::vector<double> col(static_cast<std::size_t>(k) * pw);
            const double* xi = x + static_cast<std::size_t>(img) * c_in * h * wd;
            double* yi = y + static_cast<std::size_t>(img) * c_out * p_total;
            im2col_chunk(xi, col.data(), p0, pw, c_in, h, wd, kh, kw, stride, pad, ow);
            gemm_block(w, k, col.data(), pw, yi + p0, p_total, c_out, k, pw, accumulate, bias, 0);
        }
    }
}

// Partial-sum dot product; fixed 8-lane pattern keeps results reproducible.
double dot(const double* a, const double* b, int n) {
    double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    const double s01 = lanes[0] + lanes[1];
    const double s23 = lanes[2] + lanes[3];
    const double s45 = lanes[4] + lanes[5];
    const double s67 = lanes[6] + lanes[7];
    return ((s01 + s23) + (s45 + s67)) + tail;
}

}  // namespace

void gemm(const double* a, const double* b, double* c, int m, int k, int n,
          bool accumulate) {
    const int nchunks = (n + kTile - 1) / kTile;
#pragma omp parallel for schedule(dynamic)
    for (int chunk = 0; chunk < nchunks; ++chunk) {
        const int j0 = chunk * kTile;
        const int jw = std::min(kTile, n - j0);
        gemm_block(a, k, b + j0, n, c + j0, n, m, k, jw, accumulate, nullptr, 0);
    }
}

void conv2d_forward(const double* x, const double* w, const double* bias, double* y,
                    int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                    int stride, int pad) {
    conv_forward_gemm(x, w, bias, y, n, c_in, h, wd, c_out, kh, kw, stride, pad, false);
}

void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           int n, int c_in, int h, int wd, int c_out, int kh, int kw,
                           int stride, int pad) {
    const int oh = out_extent(h, kh, stride, pad);
    const int ow = out_extent(wd, kw, stride, pad);
    if (stride == 1) {
        // dx = dy (*) flip(w) with roles of the channel axes swapped; reuse
        // the GEMM path with a transformed weight tensor.
        std::vector<double> wt(static_cast<std::size_t>(c_in) * c_out * kh * kw);
#pragma omp parallel for
        for (int c = 0; c < c_in; ++c)
            for (int o = 0; o < c_out; ++o)
                for (int u = 0; u < kh; ++u)
                    for (int v = 0; v < kw; ++v)
                        wt[((static_cast<std::size_t>(c) * c_out + o) * kh + (kh - 1 - u)) * kw +
                           (kw - 1 - v)] =
                            w[((static_cast<std::size_t>(o) * c_in + c) * kh + u) * kw + v];
        conv_forward_gemm(dy, wt.data(), nullptr, dx, n, c_out, oh, ow, c_in, kh, kw, 1,
                          kh - 1 - pad, true);
        return;
    }
    // Strided case: gather form, one thread per (image, input channel).
#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int img = 0; img < n; ++img) {
        for (int c = 0; c < c_in; ++c) {
            const double* dyi = dy + static_cast<std::size_t>(img) * c_out * oh * ow;
            double* dxc = dx + (static_cast<std::size_t>(img) * c_in + c) * h * wd;
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < wd; ++ix) {
                    double acc = 0.0;
                    for (int o = 0; o < c_out; ++o) {
                        const double* dyo = dyi + static_cast<std::size_t>(o) * oh * ow;
                        const double* wo = w + (static_cast<std::size_t>(o) * c_in + c) * kh * kw;
                        for (int u = 0; u < kh; ++u) {
                            const int ty = iy + pad - u;
                            if (ty < 0 || ty % stride != 0) continue;
                            const int oy = ty / stride;
                            if (oy >= oh) continue;
                            for (int v = 0; v < kw; ++v) {
                                const int tx = ix + pad - v;
                                if (tx < 0 || tx % stride != 0) continue;
                                const int ox = tx / stride;
                                if (ox >= ow) continue;
                                acc += dyo[static_cast<std::size_t>(oy) * ow + ox] *
                                       wo[static_cast<std::size_t>(u) * kw + v];
                            }
                        }
                    }
                    dxc[static_cast<std::size_t>(iy) * wd + ix] += acc;
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
    const int p_total = oh * ow;
    const int k = c_in * kh * kw;

    if (db) {
#pragma omp parallel for
        for (int o = 0; o < c_out; ++o) {
            double acc = 0.0;
            for (int img = 0; img < n; ++img) {
                const double* row = dy + (static_cast<std::size_t>(img) * c_out + o) * p_total;
                for (int p = 0; p < p_total; ++p) acc += row[p];
            }
            db[o] += acc;
        }
    }

    if (!dw) return;

    std::vector<double> col;
    for (int img = 0; img < n; ++img) {
        const double* xi = x + static_cast<std::size_t>(img) * c_in * h * wd;
        const double* dyi = dy + static_cast<std::size_t>(img) * c_out * p_total;
        for (int p0 = 0; p0 < p_total; p0 += kTile) {
            const int pw = std::min(kTile, p_total - p0);
            col.resize(static_cast<std::size_t>(k) * pw);
#pragma omp parallel for
            for (int c = 0; c < c_in; ++c)
                im2col_chunk(xi + static_cast<std::size_t>(c) * h * wd,
                             col.data() + static_cast<std::size_t>(c) * kh * kw * pw, p0, pw, 1,
                             h, wd, kh, kw, stride, pad, ow);
#pragma omp parallel for schedule(dynamic)
            for (int o = 0; o < c_out; ++o) {
                const double* g = dyi + static_cast<std::size_t>(o) * p_total + p0;
                double* dwo = dw + static_cast<std::size_t>(o) * k;
                for (int kk = 0; kk < k; ++kk)
                    dwo[kk] += dot(g, col.data() + static_cast<std::size_t>(kk) * pw, pw);
            }
        }
    }
}

void batchnorm_stats(const double* x, int n, int c, int h, int w,
                     double* mean, double* var) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;
#pragma omp parallel for schedule(static)
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
    const long planes = static_cast<long>(n) * c;
#pragma omp parallel for schedule(static)
    for (long pc = 0; pc < planes; ++pc) {
        const int ch = static_cast<int>(pc % c);
        const double inv = 1.0 / std::sqrt(var[ch] + eps);
        const double g = gamma[ch];
        const double b = beta[ch];
        const double mu = mean[ch];
        const double* xp = x + static_cast<std::size_t>(pc) * plane;
        double* yp = y + static_cast<std::size_t>(pc) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            yp[i] = ((xp[i] - mu) * inv) * g + b;
    }
}

void batchnorm_backward(const double* x, const double* dy, const double* mean,
                        const double* var, const double* gamma, double eps,
                        bool stats_from_batch, double* dx, double* dgamma, double* dbeta,
                        int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(static_cast<std::size_t>(n) * plane);
#pragma omp parallel for schedule(dynamic)
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
    const long nl = static_cast<long>(count);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < nl; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* y, const double* dy, double* dx, std::size_t count) {
    const long nl = static_cast<long>(count);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < nl; ++i)
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
    std::vector<Taps> xs(static_cast<std::size_t>(ow));
    for (int ox = 0; ox < ow; ++ox) xs[ox] = taps(ox, iw, ow);
#pragma omp parallel for collapse(2) schedule(static)
    for (int p = 0; p < planes; ++p) {
        for (int oy = 0; oy < oh; ++oy) {
            const double* xp = x + static_cast<std::size_t>(p) * ih * iw;
            double* yp = y + static_cast<std::size_t>(p) * oh * ow;
            const Taps ty = taps(oy, ih, oh);
            const double* rlo = xp + static_cast<std::size_t>(ty.lo) * iw;
            const double* rhi = xp + static_cast<std::size_t>(ty.hi) * iw;
            for (int ox = 0; ox < ow; ++ox) {
                const Taps& tx = xs[ox];
                const double top = rlo[tx.lo] * (1.0 - tx.t) + rlo[tx.hi] * tx.t;
                const double bot = rhi[tx.lo] * (1.0 - tx.t) + rhi[tx.hi] * tx.t;
                yp[static_cast<std::size_t>(oy) * ow + ox] = top * (1.0 - ty.t) + bot * ty.t;
            }
        }
    }
}

void bilinear_backward(const double* dy, double* dx, int planes, int ih, int iw,
                       int oh, int ow) {
    std::vector<Taps> xs(static_cast<std::size_t>(ow));
    for (int ox = 0; ox < ow; ++ox) xs[ox] = taps(ox, iw, ow);
    // Scatter overlaps within a plane, so parallelism stays at plane level.
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* dp = dy + static_cast<std::size_t>(p) * oh * ow;
        double* xp = dx + static_cast<std::size_t>(p) * ih * iw;
        for (int oy = 0; oy < oh; ++oy) {
            const Taps ty = taps(oy, ih, oh);
            for (int ox = 0; ox < ow; ++ox) {
                const Taps& tx = xs[ox];
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
    const long nl = static_cast<long>(count);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < nl; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace wisppn::kernels
