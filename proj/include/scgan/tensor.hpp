// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "scgan/errors.hpp"
#include "scgan/rng.hpp"

namespace scgan {

// Dense row-major double tensor. Shapes in use: {} is not allowed, scalars
// are {1}, images and feature maps are {C,H,W}, conv weights {O,I,kh,kw}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_numel(shape_))
            throw ConfigError("tensor: data size does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // {C,H,W} accessors.
    double& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    double at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    // {O,I,kh,kw} accessor.
    double& at4(int o, int i, int y, int x) {
        return data_[((static_cast<std::size_t>(o) * shape_[1] + i) * shape_[2] + y) *
                         shape_[3] + x];
    }
    double at4(int o, int i, int y, int x) const {
        return data_[((static_cast<std::size_t>(o) * shape_[1] + i) * shape_[2] + y) *
                         shape_[3] + x];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double item() const {
        if (numel() != 1) throw RuntimeFailure("tensor: item() on non-scalar");
        return data_[0];
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    double abs_max() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    void fill_normal(Rng& rng, double stddev) {
        for (double& v : data_) v = stddev * rng.normal();
    }

    std::uint64_t hash() const {
        std::uint64_t h = fnv1a(shape_.data(), shape_.size() * sizeof(int));
        return fnv1a(data_.data(), data_.size() * sizeof(double), h);
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + ")";
    }

private:
    static std::size_t checked_numel(const std::vector<int>& shape) {
        if (shape.empty()) throw ConfigError("tensor: empty shape");
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ConfigError("tensor: nonpositive dimension in " + shape_str(shape));
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace scgan
