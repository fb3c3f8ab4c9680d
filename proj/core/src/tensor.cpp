#include "segdesic/tensor.hpp"

#include <cmath>

#include "segdesic/errors.hpp"

namespace segdesic {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size())
        throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data_.assign(1, v);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

double& Tensor::at4(int n, int c, int h, int w) {
    const auto& s = shape_;
    return data_[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
}

double Tensor::at4(int n, int c, int h, int w) const {
    const auto& s = shape_;
    return data_[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
}

double& Tensor::at2(int r, int c) {
    return data_[static_cast<std::size_t>(r) * shape_[1] + c];
}

double Tensor::at2(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * shape_[1] + c];
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape_[i]);
    }
    s += "]";
    return s;
}

void require_ndim(const Tensor& t, int ndim, const char* what) {
    if (t.ndim() != ndim)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(ndim) +
                         ", got shape " + t.shape_str());
}

} // namespace segdesic
