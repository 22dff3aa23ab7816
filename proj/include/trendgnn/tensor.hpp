#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace trendgnn::ad {

/// Dense row-major array of 64-bit floats. Rank 0 (scalar), 1, and 2 cover
/// everything the models need. Values must be finite; construction rejects
/// NaN/Inf and debug builds re-check after every tape op.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_)) {
            throw std::invalid_argument("tensor: shape " + shape_string() + " wants " +
                                        std::to_string(count(shape_)) + " values, got " +
                                        std::to_string(data_.size()));
        }
        check_finite("construction");
    }

    static Tensor scalar(double v) { return Tensor({std::vector<std::size_t>{}}, {v}); }

    static Tensor zeros(std::size_t rows, std::size_t cols) {
        return Tensor(std::vector<std::size_t>{rows, cols});
    }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        t.check_finite("construction");
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool is_scalar() const { return shape_.empty(); }

    std::size_t rows() const { return rank() >= 1 ? shape_[0] : 1; }
    std::size_t cols() const { return rank() >= 2 ? shape_[1] : (rank() == 1 ? 1 : 1); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double scalar_value() const {
        if (size() != 1) {
            throw std::invalid_argument("tensor: scalar_value on shape " + shape_string());
        }
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_string() const {
        if (shape_.empty()) return "scalar";
        std::string s;
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void check_finite(const char* where) const {
        if (!all_finite()) {
            throw std::invalid_argument(std::string("tensor: non-finite value in ") + where);
        }
    }

    /// Internal: allocate without the finite check (ops fill it in).
    static Tensor uninitialized(std::vector<std::size_t> shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_.assign(count(t.shape_), 0.0);
        return t;
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace trendgnn::ad
