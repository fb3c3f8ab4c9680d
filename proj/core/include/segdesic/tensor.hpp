#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace segdesic {

/// Dense N-dimensional double array, row-major. Value semantics.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor. Throws ShapeError on non-positive dims.
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor full(std::vector<int> shape, double v);

    const std::vector<int>& shape() const noexcept { return shape_; }
    int ndim() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t numel() const noexcept { return data_.size(); }
    bool is_scalar() const noexcept { return data_.size() == 1 && shape_.empty(); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& vec() noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Convenience indexers for tests and small code paths.
    double& at4(int n, int c, int h, int w);
    double at4(int n, int c, int h, int w) const;
    double& at2(int r, int c);
    double at2(int r, int c) const;

    void fill(double v);
    bool all_finite() const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

/// Throws ShapeError unless the tensor has the given rank.
void require_ndim(const Tensor& t, int ndim, const char* what);

} // namespace segdesic
