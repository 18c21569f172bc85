#include "mvmt/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mvmt/errors.hpp"

namespace mvmt {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) raise(ErrorKind::Dimension, "tensor extents must be positive");
        n *= e;
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_product(shape_)) {
        raise(ErrorKind::Dimension,
              "value count " + std::to_string(values_.size()) + " does not match shape " + shape_str());
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) raise(ErrorKind::Dimension, "axis out of range for " + shape_str());
    return shape_[axis];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return values_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return values_[i * shape_[1] + j];
}

double Tensor::at3(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
}

double& Tensor::at3(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double value) {
    std::fill(values_.begin(), values_.end(), value);
}

double Tensor::norm2() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) {
        raise(ErrorKind::Dimension, "shape mismatch " + shape_str() + " vs " + other.shape_str());
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    if (!same_shape(other)) {
        raise(ErrorKind::Dimension, "shape mismatch " + shape_str() + " vs " + other.shape_str());
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

} // namespace mvmt
