#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mvmt {

/// Dense row-major tensor of 64-bit reals. Value semantics; shapes are
/// immutable after construction.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t extent(std::size_t axis) const;
    bool empty() const { return values_.empty(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j);
    double at3(std::size_t i, std::size_t j, std::size_t k) const;
    double& at3(std::size_t i, std::size_t j, std::size_t k);

    const std::vector<double>& data() const { return values_; }
    std::vector<double>& data() { return values_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double value);
    double norm2() const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

} // namespace mvmt
