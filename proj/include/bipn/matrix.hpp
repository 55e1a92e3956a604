#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bipn/errors.hpp"

namespace bipn {

/// Dense row-major real matrix. Sized for branching-program widths, not for
/// numerical linear algebra.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
  [[nodiscard]] std::vector<double>& data() noexcept { return data_; }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    check_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  DenseMatrix& operator-=(const DenseMatrix& o) {
    check_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  DenseMatrix& operator*=(double s) noexcept {
    for (auto& v : data_) v *= s;
    return *this;
  }

  /// this += s * o
  void add_scaled(const DenseMatrix& o, double s) {
    check_same_shape(o, "add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
  }

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
  friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols_ != b.rows_) {
      throw dimension_error("DenseMatrix product: " + a.shape() + " * " + b.shape());
    }
    DenseMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t l = 0; l < a.cols_; ++l) {
        const double x = a(i, l);
        if (x == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += x * b(l, j);
      }
    }
    return out;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

  [[nodiscard]] std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

 private:
  void check_same_shape(const DenseMatrix& o, const char* op) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) {
      throw dimension_error(std::string("DenseMatrix ") + op + ": " + shape() + " vs " + o.shape());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Frobenius inner product <A, B> = sum_ij A_ij B_ij.
inline double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw dimension_error("frobenius_inner: " + a.shape() + " vs " + b.shape());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double frobenius_norm_squared(const DenseMatrix& m) { return frobenius_inner(m, m); }

inline double frobenius_norm(const DenseMatrix& m) { return std::sqrt(frobenius_norm_squared(m)); }

inline double max_abs_entry(const DenseMatrix& m) {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::abs(v));
  return best;
}

}  // namespace bipn
