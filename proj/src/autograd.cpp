#include "wisppn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wisppn/common.hpp"
#include "wisppn/kernels.hpp"

namespace wisppn::ag {

namespace {

// Allocate-on-demand accumulation target. Bound leaves accumulate straight
// into their Param's grad buffer.
double* grad_sink(Node& n) {
    if (!n.grad.defined()) {
        if (n.bound) {
            n.bound->ensure_grad();
            n.grad = n.bound->grad;
        } else {
            n.grad = Tensor::zeros(n.value.shape());
        }
    }
    return n.grad.data();
}

struct ConvDims {
    int n, c_in, h, w, c_out, kh, kw, oh, ow;
    bool batched;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (w.rank() != 4) throw DimensionError("conv2d weight must be rank 4, got " + w.shape_str());
    if (x.rank() != 3 && x.rank() != 4)
        throw DimensionError("conv2d input must be rank 3 or 4, got " + x.shape_str());
    ConvDims d;
    d.batched = x.rank() == 4;
    d.n = d.batched ? x.dim(0) : 1;
    d.c_in = x.dim(d.batched ? 1 : 0);
    d.h = x.dim(d.batched ? 2 : 1);
    d.w = x.dim(d.batched ? 3 : 2);
    d.c_out = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    if (d.kh != d.kw || (d.kh != 1 && d.kh != 3))
        throw DimensionError("conv2d kernel must be 1x1 or 3x3, got " + w.shape_str());
    if (w.dim(1) != d.c_in)
        throw DimensionError("conv2d channel mismatch: input " + x.shape_str() + " vs weight " +
                             w.shape_str());
    if (b.rank() != 1 || b.dim(0) != d.c_out)
        throw DimensionError("conv2d bias must have shape [" + std::to_string(d.c_out) + "]");
    if (stride < 1 || pad < 0) throw DimensionError("conv2d needs stride >= 1 and pad >= 0");
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.h + 2 * pad < d.kh || d.oh < 1 || d.ow < 1)
        throw DimensionError("conv2d output would be empty for input " + x.shape_str());
    return d;
}

}  // namespace

Var Graph::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && grad_enabled_;
    n->is_leaf = true;
    if (n->requires_grad) tape_.push_back(n);
    return Var(n);
}

Var Graph::param(Param& p) {
    auto n = std::make_shared<Node>();
    n->value = p.value;
    n->requires_grad = grad_enabled_;
    n->is_leaf = true;
    n->bound = &p;
    if (n->requires_grad) tape_.push_back(n);
    return Var(n);
}

std::shared_ptr<Node> Graph::record(Tensor value, std::vector<std::shared_ptr<Node>> inputs,
                                    std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    if (grad_enabled_)
        for (const auto& in : inputs)
            if (in->requires_grad) needs = true;
    n->requires_grad = needs;
    if (needs) {
        n->inputs = std::move(inputs);
        n->backward_fn = std::move(backward_fn);
        tape_.push_back(n);
    }
    return n;
}

void Graph::backward(const Var& loss) {
    if (!loss.defined() || loss.value().numel() != 1)
        throw DimensionError("backward requires a scalar loss");
    Node* root = loss.node().get();
    if (!root->requires_grad) return;

    // Fresh scratch grads for intermediates; leaf grads persist so repeated
    // backward calls accumulate.
    for (auto& n : tape_)
        if (!n->is_leaf) n->grad = Tensor();

    grad_sink(*root)[0] += 1.0;

    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        Node& n = **it;
        if (!n.grad.defined()) continue;
        if (n.backward_fn) n.backward_fn(n);
        if (!n.is_leaf) n.grad = Tensor();  // frontier stays small
    }
}

Var conv2d(Graph& g, const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
    const ConvDims d = conv_dims(x.value(), weight.value(), bias.value(), stride, pad);
    Tensor y = d.batched ? Tensor({d.n, d.c_out, d.oh, d.ow}) : Tensor({d.c_out, d.oh, d.ow});
    kernels::conv2d_forward(x.value().data(), weight.value().data(), bias.value().data(),
                            y.data(), d.n, d.c_in, d.h, d.w, d.c_out, d.kh, d.kw, stride, pad);
    auto xn = x.node();
    auto wn = weight.node();
    auto bn = bias.node();
    auto back = [xn, wn, bn, d, stride, pad](Node& self) {
        const double* dy = self.grad.data();
        if (xn->requires_grad)
            kernels::conv2d_backward_input(dy, wn->value.data(), grad_sink(*xn), d.n, d.c_in,
                                           d.h, d.w, d.c_out, d.kh, d.kw, stride, pad);
        if (wn->requires_grad || bn->requires_grad)
            kernels::conv2d_backward_params(xn->value.data(), dy,
                                            wn->requires_grad ? grad_sink(*wn) : nullptr,
                                            bn->requires_grad ? grad_sink(*bn) : nullptr, d.n,
                                            d.c_in, d.h, d.w, d.c_out, d.kh, d.kw, stride, pad);
    };
    return Var(g.record(std::move(y), {xn, wn, bn}, back));
}

Var batch_norm2d(Graph& g, const Var& x, const Var& gamma, const Var& beta,
                 Tensor& running_mean, Tensor& running_var, bool train,
                 double momentum, double eps) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 && xv.rank() != 4)
        throw DimensionError("batch_norm2d input must be rank 3 or 4, got " + xv.shape_str());
    const bool batched = xv.rank() == 4;
    const int n = batched ? xv.dim(0) : 1;
    const int c = xv.dim(batched ? 1 : 0);
    const int h = xv.dim(batched ? 2 : 1);
    const int w = xv.dim(batched ? 3 : 2);
    if (gamma.value().numel() != static_cast<std::size_t>(c) ||
        beta.value().numel() != static_cast<std::size_t>(c))
        throw DimensionError("batch_norm2d gamma/beta must have " + std::to_string(c) +
                             " entries");
    if (running_mean.numel() != static_cast<std::size_t>(c) ||
        running_var.numel() != static_cast<std::size_t>(c))
        throw DimensionError("batch_norm2d running stats must have " + std::to_string(c) +
                             " entries");
    const std::size_t m = static_cast<std::size_t>(n) * h * w;
    if (train && m < 2)
        throw DimensionError("batch_norm2d: degenerate batch (one element per channel) in train mode");

    Tensor mean({c}), var({c});
    if (train) {
        kernels::batchnorm_stats(xv.data(), n, c, h, w, mean.data(), var.data());
        // Running variance uses the unbiased estimate, as frameworks do.
        const double unbias = static_cast<double>(m) / static_cast<double>(m - 1);
        for (int ch = 0; ch < c; ++ch) {
            running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mean[ch];
            running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var[ch] * unbias;
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = running_mean[ch];
            var[ch] = running_var[ch];
        }
    }

    Tensor y(xv.shape());
    kernels::batchnorm_forward(xv.data(), mean.data(), var.data(), gamma.value().data(),
                               beta.value().data(), eps, y.data(), n, c, h, w);

    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    auto back = [xn, gn, bn, mean, var, eps, train, n, c, h, w](Node& self) {
        kernels::batchnorm_backward(xn->value.data(), self.grad.data(), mean.data(), var.data(),
                                    gn->value.data(), eps, train,
                                    xn->requires_grad ? grad_sink(*xn) : nullptr,
                                    gn->requires_grad ? grad_sink(*gn) : nullptr,
                                    bn->requires_grad ? grad_sink(*bn) : nullptr, n, c, h, w);
    };
    return Var(g.record(std::move(y), {xn, gn, bn}, back));
}

namespace {

Var relu_impl(Graph& g, const Var& x, bool in_place) {
    Tensor y = in_place ? x.value() : Tensor(x.value().shape());
    kernels::relu_forward(x.value().data(), y.data(), y.numel());
    auto xn = x.node();
    auto back = [xn](Node& self) {
        if (xn->requires_grad)
            kernels::relu_backward(self.value.data(), self.grad.data(), grad_sink(*xn),
                                   self.value.numel());
    };
    return Var(g.record(std::move(y), {xn}, back));
}

}  // namespace

Var relu(Graph& g, const Var& x) { return relu_impl(g, x, false); }
Var relu_(Graph& g, const Var& x) { return relu_impl(g, x, true); }

Var bilinear_resize(Graph& g, const Var& x, int out_h, int out_w) {
    const Tensor& xv = x.value();
    if (xv.rank() != 3 && xv.rank() != 4)
        throw DimensionError("bilinear_resize input must be rank 3 or 4, got " + xv.shape_str());
    if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_resize output extents must be >= 1");
    const bool batched = xv.rank() == 4;
    const int planes = batched ? xv.dim(0) * xv.dim(1) : xv.dim(0);
    const int ih = xv.dim(batched ? 2 : 1);
    const int iw = xv.dim(batched ? 3 : 2);
    Tensor y = batched ? Tensor({xv.dim(0), xv.dim(1), out_h, out_w})
                       : Tensor({xv.dim(0), out_h, out_w});
    kernels::bilinear_forward(xv.data(), y.data(), planes, ih, iw, out_h, out_w);
    auto xn = x.node();
    auto back = [xn, planes, ih, iw, out_h, out_w](Node& self) {
        if (xn->requires_grad)
            kernels::bilinear_backward(self.grad.data(), grad_sink(*xn), planes, ih, iw, out_h,
                                       out_w);
    };
    return Var(g.record(std::move(y), {xn}, back));
}

namespace {

Var add_impl(Graph& g, const Var& a, const Var& b, bool in_place) {
    if (!a.value().same_shape(b.value()))
        throw DimensionError("add: shape mismatch " + a.value().shape_str() + " vs " +
                             b.value().shape_str());
    const std::size_t n = a.value().numel();
    Tensor y = in_place ? a.value() : Tensor(a.value().shape());
    const double* pa = a.value().data();
    const double* pb = b.value().data();
    double* py = y.data();
    const long nl = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < nl; ++i) py[i] = pa[i] + pb[i];
    auto an = a.node();
    auto bn = b.node();
    auto back = [an, bn](Node& self) {
        const double* dy = self.grad.data();
        const long count = static_cast<long>(self.grad.numel());
        if (an->requires_grad) {
            double* da = grad_sink(*an);
#pragma omp parallel for schedule(static)
            for (long i = 0; i < count; ++i) da[i] += dy[i];
        }
        if (bn->requires_grad) {
            double* db = grad_sink(*bn);
#pragma omp parallel for schedule(static)
            for (long i = 0; i < count; ++i) db[i] += dy[i];
        }
    };
    return Var(g.record(std::move(y), {an, bn}, back));
}

}  // namespace

Var add(Graph& g, const Var& a, const Var& b) { return add_impl(g, a, b, false); }
Var add_(Graph& g, const Var& a, const Var& b) { return add_impl(g, a, b, true); }

Var negate(Graph& g, const Var& x) {
    Tensor y(x.value().shape());
    const double* px = x.value().data();
    double* py = y.data();
    for (std::size_t i = 0; i < y.numel(); ++i) py[i] = -px[i];
    auto xn = x.node();
    auto back = [xn](Node& self) {
        if (!xn->requires_grad) return;
        double* dx = grad_sink(*xn);
        const double* dy = self.grad.data();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) dx[i] -= dy[i];
    };
    return Var(g.record(std::move(y), {xn}, back));
}

Var sum_all(Graph& g, const Var& x) {
    double acc = 0.0;
    const double* px = x.value().data();
    for (std::size_t i = 0; i < x.value().numel(); ++i) acc += px[i];
    auto xn = x.node();
    auto back = [xn](Node& self) {
        if (!xn->requires_grad) return;
        const double gse = self.grad[0];
        double* dx = grad_sink(*xn);
        for (std::size_t i = 0; i < xn->value.numel(); ++i) dx[i] += gse;
    };
    return Var(g.record(Tensor::scalar(acc), {xn}, back));
}

Var weighted_sse(Graph& g, const Var& pred, const Tensor& target, const Tensor& weight,
                 double scale) {
    if (!pred.value().same_shape(target) || !pred.value().same_shape(weight))
        throw DimensionError("weighted_sse: pred " + pred.value().shape_str() + ", target " +
                             target.shape_str() + ", weight " + weight.shape_str() +
                             " must agree");
    const double* p = pred.value().data();
    const double* t = target.data();
    const double* w = weight.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < target.numel(); ++i) {
        const double d = p[i] - t[i];
        acc += w[i] * d * d;
    }
    auto pn = pred.node();
    auto back = [pn, target, weight, scale](Node& self) {
        if (!pn->requires_grad) return;
        const double gs = self.grad[0] * scale;
        double* dp = grad_sink(*pn);
        const double* pv = pn->value.data();
        const double* tv = target.data();
        const double* wv = weight.data();
        const long count = static_cast<long>(target.numel());
#pragma omp parallel for schedule(static)
        for (long i = 0; i < count; ++i)
            dp[i] += gs * 2.0 * wv[i] * (pv[i] - tv[i]);
    };
    return Var(g.record(Tensor::scalar(scale * acc), {pn}, back));
}

double grad_check(const std::function<Var(Graph&)>& build, const std::vector<Param*>& leaves,
                  double eps, int samples_per_leaf, std::uint64_t seed) {
    for (Param* p : leaves) p->zero_grad();
    std::vector<Tensor> analytic;
    {
        Graph g;
        Var loss = build(g);
        g.backward(loss);
    }
    for (Param* p : leaves) {
        p->ensure_grad();
        analytic.push_back(p->grad.clone());
    }

    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Param& p = *leaves[li];
        const std::size_t n = p.value.numel();
        std::vector<std::size_t> picks;
        if (n <= static_cast<std::size_t>(samples_per_leaf)) {
            for (std::size_t i = 0; i < n; ++i) picks.push_back(i);
        } else {
            std::set<std::size_t> seen;
            while (seen.size() < static_cast<std::size_t>(samples_per_leaf))
                seen.insert(static_cast<std::size_t>(rng.below(n)));
            picks.assign(seen.begin(), seen.end());
        }
        for (std::size_t idx : picks) {
            const double old = p.value[idx];
            p.value[idx] = old + eps;
            double f_plus;
            {
                Graph g(false);
                f_plus = build(g).scalar();
            }
            p.value[idx] = old - eps;
            double f_minus;
            {
                Graph g(false);
                f_minus = build(g).scalar();
            }
            p.value[idx] = old;
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = analytic[li][idx];
            const double rel = std::abs(a - numeric) /
                               std::max(1e-8, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace wisppn::ag
