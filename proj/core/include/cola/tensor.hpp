#pragma once

#include <initializer_list>
#include <numeric>
#include <vector>

#include "cola/common.hpp"

namespace cola {

/// Dense row-major tensor of doubles. Images are stored CHW, batches NCHW,
/// feature matrices (N, F).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0);
    }
    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    scalar* data() { return data_.data(); }
    const scalar* data() const { return data_.data(); }
    scalar& operator[](std::size_t i) { return data_[i]; }
    scalar operator[](std::size_t i) const { return data_[i]; }

    std::vector<scalar>& vec() { return data_; }
    const std::vector<scalar>& vec() const { return data_; }

    // 3D/4D accessors, unchecked.
    scalar& at3(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    scalar at3(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    scalar& at4(int n, int c, int y, int x) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    scalar at4(int n, int c, int y, int x) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    scalar& at2(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
    scalar at2(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

    void fill(scalar v) { std::fill(data_.begin(), data_.end(), v); }
    void reshape(std::vector<int> shape);
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ConfigError("tensor dimension must be non-negative");
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    std::vector<scalar> data_;
};

}  // namespace cola
