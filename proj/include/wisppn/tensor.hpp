#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "wisppn/common.hpp"

namespace wisppn {

// Dense row-major f64 tensor. The buffer is shared between copies, so a
// Tensor behaves like a cheap handle; use clone() for an independent copy.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<double>>(count(shape_), 0.0)) {}

    Tensor(std::vector<int> shape, std::vector<double> values)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<double>>(std::move(values))) {
        if (data_->size() != count(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_->size()) +
                                 " does not match shape (" + shape_str() + ")");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : *t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    bool defined() const { return static_cast<bool>(data_); }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_ ? data_->size() : 0; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }

    double& operator[](std::size_t i) { return (*data_)[i]; }
    double operator[](std::size_t i) const { return (*data_)[i]; }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    // Same buffer viewed under a different shape with equal element count.
    Tensor reshaped(std::vector<int> shape) const {
        if (count(shape) != numel())
            throw DimensionError("reshape to (" + shape_str(shape) + ") changes element count");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool shares_buffer(const Tensor& o) const { return data_ == o.data_; }

    void fill(double v) {
        for (auto& x : *data_) x = v;
    }

    std::string shape_str() const { return shape_str(shape_); }

    static std::string shape_str(const std::vector<int>& s) {
        std::string r;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) r += "x";
            r += std::to_string(s[i]);
        }
        return r;
    }

    static std::size_t count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DimensionError("non-positive extent in shape (" + shape_str(shape) + ")");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<double>> data_;
};

// Named trainable tensor; grad is allocated on first backward pass.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    void ensure_grad() {
        if (!grad.defined()) grad = Tensor::zeros(value.shape());
    }

    void zero_grad() {
        if (grad.defined()) grad.fill(0.0);
    }
};

}  // namespace wisppn
