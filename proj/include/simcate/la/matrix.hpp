#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace simcate::la {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    d_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
      d_.insert(d_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix from_row(const Vector& v) {
    Matrix m(1, v.size());
    m.d_ = v;
    return m;
  }
  static Matrix from_col(const Vector& v) {
    Matrix m(v.size(), 1);
    m.d_ = v;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

  double* row_ptr(std::size_t i) { return d_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return d_.data() + i * cols_; }

  Vector row(std::size_t i) const {
    return Vector(row_ptr(i), row_ptr(i) + cols_);
  }
  void set_row(std::size_t i, const Vector& v) {
    if (v.size() != cols_) throw std::invalid_argument("set_row: length mismatch");
    for (std::size_t j = 0; j < cols_; ++j) (*this)(i, j) = v[j];
  }
  Vector col(std::size_t j) const {
    Vector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  std::vector<double>& data() { return d_; }
  const std::vector<double>& data() const { return d_; }

  Matrix& operator+=(const Matrix& o) {
    check_same_shape(o, "+=");
    for (std::size_t k = 0; k < d_.size(); ++k) d_[k] += o.d_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same_shape(o, "-=");
    for (std::size_t k = 0; k < d_.size(); ++k) d_[k] -= o.d_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& x : d_) x *= s;
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  void check_same_shape(const Matrix& o, const char* op) const {
    if (!same_shape(o))
      throw std::invalid_argument(std::string("Matrix ") + op + ": shape mismatch " +
                                  shape_str() + " vs " + o.shape_str());
  }
  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> d_;
};

// Small vector helpers shared across the project.
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);

Matrix vstack(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace simcate::la
