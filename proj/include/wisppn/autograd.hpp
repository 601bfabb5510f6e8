#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "wisppn/tensor.hpp"

namespace wisppn::ag {

class Graph;

struct Node {
    Tensor value;
    Tensor grad;                 // leaves: persistent, accumulated; others: scratch
    bool requires_grad = false;
    bool is_leaf = false;
    Param* bound = nullptr;      // leaf tied to an external Param
    std::function<void(Node&)> backward_fn;
    std::vector<std::shared_ptr<Node>> inputs;
};

// Handle to a node in (or detached from) a computation graph.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor& value() const { return n_->value; }
    Tensor& value() { return n_->value; }
    const Tensor& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    const std::vector<int>& shape() const { return n_->value.shape(); }
    double scalar() const {
        if (n_->value.numel() != 1) throw DimensionError("scalar() on non-scalar tensor");
        return n_->value[0];
    }
    std::shared_ptr<Node> node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

// Records operations in creation order; that order is the topological order
// used by backward. With gradients disabled the tape stays empty and
// intermediate values are freed as soon as their handles go out of scope.
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Var leaf(Tensor value, bool requires_grad = false);
    Var param(Param& p);

    // Reverse-mode accumulation from a scalar loss into every requires_grad
    // leaf. Repeated calls without zeroing grads accumulate.
    void backward(const Var& loss);

    std::size_t size() const { return tape_.size(); }

    std::shared_ptr<Node> record(Tensor value, std::vector<std::shared_ptr<Node>> inputs,
                                 std::function<void(Node&)> backward_fn);

private:
    std::vector<std::shared_ptr<Node>> tape_;
    bool grad_enabled_;
};

// Zero-padded cross-correlation. x is [C,H,W] or [N,C,H,W]; weight is
// [C_out,C_in,kh,kw] with kh == kw in {1,3}; bias is [C_out].
Var conv2d(Graph& g, const Var& x, const Var& weight, const Var& bias, int stride, int pad);

// Train mode normalizes with batch statistics (population variance) and
// updates the running stats in place; eval mode reads the running stats.
Var batch_norm2d(Graph& g, const Var& x, const Var& gamma, const Var& beta,
                 Tensor& running_mean, Tensor& running_var, bool train,
                 double momentum, double eps);

Var relu(Graph& g, const Var& x);

// In-place variant: overwrites x's buffer. Only valid when no other consumer
// needs x's pre-activation values (the residual-stack wiring guarantees it).
Var relu_(Graph& g, const Var& x);

Var bilinear_resize(Graph& g, const Var& x, int out_h, int out_w);

Var add(Graph& g, const Var& a, const Var& b);

// In-place variant accumulating into a's buffer; same caveat as relu_.
Var add_(Graph& g, const Var& a, const Var& b);

Var negate(Graph& g, const Var& x);

Var sum_all(Graph& g, const Var& x);

// scale * sum(weight * (pred - target)^2), the PAM regression loss core.
Var weighted_sse(Graph& g, const Var& pred, const Tensor& target, const Tensor& weight,
                 double scale);

// Central-difference check of every analytic gradient reachable from the
// rebuilt scalar loss. Samples up to samples_per_leaf entries per leaf and
// returns max |a - n| / max(1e-8, |a| + |n|).
double grad_check(const std::function<Var(Graph&)>& build, const std::vector<Param*>& leaves,
                  double eps = 1e-6, int samples_per_leaf = 16, std::uint64_t seed = 1234);

}  // namespace wisppn::ag
