// Times the OpenMP kernels against the serial reference at network shapes.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "wisppn/common.hpp"
#include "wisppn/kernels.hpp"
#include "wisppn/kernels_serial.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double flops, double ref_ms, double omp_ms) {
    std::printf("%-34s %10.2f ms %10.2f ms %7.2fx %9.2f GFLOP/s\n", name, ref_ms, omp_ms,
                ref_ms / omp_ms, flops / (omp_ms * 1e6));
}

std::vector<double> randomized(std::size_t n, wisppn::Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

void bench_conv(const char* name, int n, int cin, int h, int w, int cout, int k, int stride,
                int pad, int reps) {
    wisppn::Rng rng(7);
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    auto x = randomized(static_cast<std::size_t>(n) * cin * h * w, rng);
    auto wt = randomized(static_cast<std::size_t>(cout) * cin * k * k, rng);
    auto b = randomized(static_cast<std::size_t>(cout), rng);
    std::vector<double> y(static_cast<std::size_t>(n) * cout * oh * ow);
    const double flops = 2.0 * n * cout * oh * ow * cin * k * k;

    const double ref_ms = time_ms(
        [&] {
            wisppn::ref::conv2d_forward(x.data(), wt.data(), b.data(), y.data(), n, cin, h, w,
                                        cout, k, k, stride, pad);
        },
        reps);
    const double omp_ms = time_ms(
        [&] {
            wisppn::kernels::conv2d_forward(x.data(), wt.data(), b.data(), y.data(), n, cin, h,
                                            w, cout, k, k, stride, pad);
        },
        reps);
    report(name, flops, ref_ms, omp_ms);
}

void bench_conv_backward(int n, int cin, int h, int w, int cout, int k, int stride, int pad,
                         int reps) {
    wisppn::Rng rng(7);
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    auto x = randomized(static_cast<std::size_t>(n) * cin * h * w, rng);
    auto wt = randomized(static_cast<std::size_t>(cout) * cin * k * k, rng);
    auto dy = randomized(static_cast<std::size_t>(n) * cout * oh * ow, rng);
    std::vector<double> dx(x.size());
    std::vector<double> dw(wt.size());
    std::vector<double> db(static_cast<std::size_t>(cout));
    const double flops = 2.0 * n * cout * oh * ow * cin * k * k;

    double ref_ms = time_ms(
        [&] {
            std::memset(dx.data(), 0, dx.size() * 8);
            wisppn::ref::conv2d_backward_input(dy.data(), wt.data(), dx.data(), n, cin, h, w,
                                               cout, k, k, stride, pad);
        },
        reps);
    double omp_ms = time_ms(
        [&] {
            std::memset(dx.data(), 0, dx.size() * 8);
            wisppn::kernels::conv2d_backward_input(dy.data(), wt.data(), dx.data(), n, cin, h, w,
                                                   cout, k, k, stride, pad);
        },
        reps);
    report("conv2d bwd input 300x36x36", flops, ref_ms, omp_ms);

    ref_ms = time_ms(
        [&] {
            std::memset(dw.data(), 0, dw.size() * 8);
            std::memset(db.data(), 0, db.size() * 8);
            wisppn::ref::conv2d_backward_params(x.data(), dy.data(), dw.data(), db.data(), n,
                                                cin, h, w, cout, k, k, stride, pad);
        },
        reps);
    omp_ms = time_ms(
        [&] {
            std::memset(dw.data(), 0, dw.size() * 8);
            std::memset(db.data(), 0, db.size() * 8);
            wisppn::kernels::conv2d_backward_params(x.data(), dy.data(), dw.data(), db.data(), n,
                                                    cin, h, w, cout, k, k, stride, pad);
        },
        reps);
    report("conv2d bwd params 300x36x36", flops, ref_ms, omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
    const bool full = argc > 1 && std::string(argv[1]) == "--full";

    std::printf("%-34s %13s %13s %8s %16s\n", "kernel", "serial", "openmp", "speedup",
                "openmp rate");

    bench_conv("conv2d fwd 150->150 36x36 s1", 1, 150, 36, 36, 150, 3, 1, 1, 3);
    bench_conv("conv2d fwd 300->300 18x18 s1", 1, 300, 18, 18, 300, 3, 1, 1, 3);
    bench_conv("conv2d fwd 150->300 36x36 s2", 1, 150, 72, 72, 300, 3, 2, 1, 3);
    if (full) bench_conv("conv2d fwd 150->150 144x144 s1", 1, 150, 144, 144, 150, 3, 1, 1, 1);
    bench_conv_backward(1, 300, 36, 36, 300, 3, 1, 1, 2);

    {
        wisppn::Rng rng(7);
        const int m = 300, k = 1350, n = 1296;
        auto a = randomized(static_cast<std::size_t>(m) * k, rng);
        auto b = randomized(static_cast<std::size_t>(k) * n, rng);
        std::vector<double> c(static_cast<std::size_t>(m) * n);
        const double flops = 2.0 * m * k * n;
        const double ref_ms = time_ms(
            [&] { wisppn::ref::gemm(a.data(), b.data(), c.data(), m, k, n, false); }, 2);
        const double omp_ms = time_ms(
            [&] { wisppn::kernels::gemm(a.data(), b.data(), c.data(), m, k, n, false); }, 2);
        report("gemm 300x1350x1296", flops, ref_ms, omp_ms);
    }

    {
        wisppn::Rng rng(7);
        const int n = 4, c = 150, h = 72, w = 72;
        auto x = randomized(static_cast<std::size_t>(n) * c * h * w, rng);
        std::vector<double> mean(c), var(c), y(x.size());
        auto gamma = randomized(static_cast<std::size_t>(c), rng);
        auto beta = randomized(static_cast<std::size_t>(c), rng);
        const double flops = 4.0 * static_cast<double>(x.size());
        const double ref_ms = time_ms(
            [&] {
                wisppn::ref::batchnorm_stats(x.data(), n, c, h, w, mean.data(), var.data());
                wisppn::ref::batchnorm_forward(x.data(), mean.data(), var.data(), gamma.data(),
                                               beta.data(), 1e-5, y.data(), n, c, h, w);
            },
            3);
        const double omp_ms = time_ms(
            [&] {
                wisppn::kernels::batchnorm_stats(x.data(), n, c, h, w, mean.data(), var.data());
                wisppn::kernels::batchnorm_forward(x.data(), mean.data(), var.data(),
                                                   gamma.data(), beta.data(), 1e-5, y.data(), n,
                                                   c, h, w);
            },
            3);
        report("batchnorm fwd 4x150x72x72", flops, ref_ms, omp_ms);
    }

    {
        wisppn::Rng rng(7);
        const int c = 150, ih = 3, iw = 3, oh = 144, ow = 144;
        auto x = randomized(static_cast<std::size_t>(c) * ih * iw, rng);
        std::vector<double> y(static_cast<std::size_t>(c) * oh * ow);
        const double flops = 8.0 * static_cast<double>(y.size());
        const double ref_ms = time_ms(
            [&] { wisppn::ref::bilinear_forward(x.data(), y.data(), c, ih, iw, oh, ow); }, 5);
        const double omp_ms = time_ms(
            [&] { wisppn::kernels::bilinear_forward(x.data(), y.data(), c, ih, iw, oh, ow); },
            5);
        report("bilinear 150: 3x3 -> 144x144", flops, ref_ms, omp_ms);
    }

    {
        wisppn::Rng rng(7);
        const std::size_t n = 4 * 1000 * 1000;
        auto p = randomized(n, rng);
        auto g = randomized(n, rng);
        std::vector<double> m(n), v(n);
        const double flops = 10.0 * static_cast<double>(n);
        const double ref_ms = time_ms(
            [&] {
                wisppn::ref::adam_update(p.data(), g.data(), m.data(), v.data(), n, 1e-3, 0.9,
                                         0.999, 1e-8, 1);
            },
            3);
        const double omp_ms = time_ms(
            [&] {
                wisppn::kernels::adam_update(p.data(), g.data(), m.data(), v.data(), n, 1e-3,
                                             0.9, 0.999, 1e-8, 1);
            },
            3);
        report("adam update 4M params", flops, ref_ms, omp_ms);
    }

    return 0;
}
