#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace xggm {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Vectors are k x 1 columns by convention.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("ragged initializer list");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix column(const std::vector<double>& values) {
    Matrix m(values.size(), 1);
    m.data_ = values;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& at(std::size_t k) { return data_[k]; }
  double at(std::size_t k) const { return data_[k]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double scalar() const {
    if (!is_scalar()) throw ContractError("scalar() on non 1x1 matrix");
    return data_[0];
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
  Matrix out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out.at(k) += b.at(k);
  return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
  Matrix out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out.at(k) -= b.at(k);
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("hadamard: shape mismatch");
  Matrix out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out.at(k) *= b.at(k);
  return out;
}

inline Matrix scale(const Matrix& a, double c) {
  Matrix out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out.at(k) *= c;
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.at(k) - b.at(k)));
  return m;
}

inline std::size_t upper_triangle_size(std::size_t n) { return n * (n - 1) / 2; }

/// Row-major order over strictly-upper-triangular positions (i < j).
inline Matrix pack_upper(const Matrix& r) {
  if (r.rows() != r.cols()) throw DimensionError("pack_upper: matrix not square");
  if (r.rows() < 2) throw DimensionError("pack_upper: needs at least 2 nodes");
  const std::size_t n = r.rows();
  Matrix out(upper_triangle_size(n), 1);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.at(k++) = r(i, j);
  return out;
}

/// Symmetric matrix from a packed strictly-upper-triangular vector; diagonal set to 1.
inline Matrix unpack_upper(const Matrix& r, std::size_t n) {
  if (r.cols() != 1 || r.rows() != upper_triangle_size(n))
    throw DimensionError("unpack_upper: vector length != n(n-1)/2");
  Matrix out(n, n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      out(i, j) = r.at(k);
      out(j, i) = r.at(k);
      ++k;
    }
  }
  return out;
}

}  // namespace xggm
