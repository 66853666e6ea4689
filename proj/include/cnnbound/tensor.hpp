#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "cnnbound/errors.hpp"

namespace cnnbound {

using Complex = std::complex<double>;

/// Dense row-major matrix. `Matrix<double>` holds fully connected weights and
/// materialized convolution operators; `Matrix<Complex>` holds DFT blocks.
template <class T>
class Matrix {
public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                                 std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(T s) noexcept {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(T s, Matrix a) { return a *= s; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    void require_same_shape(const Matrix& o) const {
        if (!same_shape(o))
            throw DimensionError("matrix shape mismatch: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                 " vs " + std::to_string(o.rows_) + "x" + std::to_string(o.cols_));
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

/// Convolution kernel with dims (k1, k2, c_in, c_out), row-major with the
/// output channel fastest.
class RealTensor4 {
public:
    using Dims = std::array<std::size_t, 4>;

    RealTensor4() = default;
    explicit RealTensor4(Dims dims) : dims_(dims), data_(count(dims), 0.0) {}
    RealTensor4(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
        if (data_.size() != count(dims_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match dims");
    }

    /// The kernel whose convolution is the identity map: K[0,0,i,i] = 1.
    static RealTensor4 delta_identity(std::size_t k, std::size_t channels) {
        RealTensor4 t({k, k, channels, channels});
        for (std::size_t i = 0; i < channels; ++i) t(0, 0, i, i) = 1.0;
        return t;
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t k1() const noexcept { return dims_[0]; }
    std::size_t k2() const noexcept { return dims_[1]; }
    std::size_t c_in() const noexcept { return dims_[2]; }
    std::size_t c_out() const noexcept { return dims_[3]; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t p, std::size_t q, std::size_t i, std::size_t o) noexcept {
        return data_[((p * dims_[1] + q) * dims_[2] + i) * dims_[3] + o];
    }
    double operator()(std::size_t p, std::size_t q, std::size_t i, std::size_t o) const noexcept {
        return data_[((p * dims_[1] + q) * dims_[2] + i) * dims_[3] + o];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    RealTensor4& operator+=(const RealTensor4& o) {
        require_same_dims(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    RealTensor4& operator-=(const RealTensor4& o) {
        require_same_dims(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    RealTensor4& operator*=(double s) noexcept {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend RealTensor4 operator+(RealTensor4 a, const RealTensor4& b) { return a += b; }
    friend RealTensor4 operator-(RealTensor4 a, const RealTensor4& b) { return a -= b; }
    friend RealTensor4 operator*(double s, RealTensor4 a) { return a *= s; }
    friend bool operator==(const RealTensor4& a, const RealTensor4& b) {
        return a.dims_ == b.dims_ && a.data_ == b.data_;
    }

    static std::size_t count(const Dims& d) noexcept { return d[0] * d[1] * d[2] * d[3]; }

private:
    void require_same_dims(const RealTensor4& o) const {
        if (dims_ != o.dims_) throw DimensionError("kernel shape mismatch");
    }

    Dims dims_{0, 0, 0, 0};
    std::vector<double> data_;
};

template <class Range>
bool all_finite(const Range& values) {
    for (const auto& v : values) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Complex>) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        } else {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

} // namespace cnnbound
