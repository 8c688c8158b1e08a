// Minimal dense real linear algebra used across the library.
//
// Everything is double precision, row-major, value-semantic. Construction
// from entry data rejects non-finite values; shapes are validated at the
// operation boundary with errors naming both sides of the mismatch.

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace preopt {

// Precondition violations (shape mismatches, bad parameters).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operations that need at least one sample.
class EmptySampleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear systems that cannot be solved as requested.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solvers whose state left the finite range.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_finite(const std::vector<double>& entries, const char* what) {
  for (double v : entries) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string(what) + ": non-finite entry on construction");
    }
  }
}

}  // namespace detail

class DenseVector {
 public:
  DenseVector() = default;

  explicit DenseVector(std::size_t dim) : entries_(dim, 0.0) {}

  DenseVector(std::initializer_list<double> init) : entries_(init) {
    detail::require_finite(entries_, "DenseVector");
  }

  explicit DenseVector(std::vector<double> entries) : entries_(std::move(entries)) {
    detail::require_finite(entries_, "DenseVector");
  }

  std::size_t dim() const { return entries_.size(); }

  double operator[](std::size_t i) const { return entries_[i]; }
  double& operator[](std::size_t i) { return entries_[i]; }

  const std::vector<double>& entries() const { return entries_; }

  bool all_finite() const {
    for (double v : entries_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::vector<double> entries_;
};

class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
      throw ContractError("DenseMatrix: entry count " + std::to_string(entries_.size()) +
                          " != rows*cols " + std::to_string(rows_ * cols_));
    }
    detail::require_finite(entries_, "DenseMatrix");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }

  const std::vector<double>& entries() const { return entries_; }

  bool all_finite() const {
    for (double v : entries_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

class DiagonalMatrix {
 public:
  DiagonalMatrix() = default;

  explicit DiagonalMatrix(std::size_t dim) : diagonal_(dim) {}

  explicit DiagonalMatrix(DenseVector diagonal) : diagonal_(std::move(diagonal)) {}

  DiagonalMatrix(std::initializer_list<double> init) : diagonal_(init) {}

  static DiagonalMatrix identity(std::size_t n) {
    DiagonalMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.diagonal_[i] = 1.0;
    return m;
  }

  std::size_t dim() const { return diagonal_.dim(); }

  double operator[](std::size_t i) const { return diagonal_[i]; }
  double& operator[](std::size_t i) { return diagonal_[i]; }

  const DenseVector& diagonal() const { return diagonal_; }

 private:
  DenseVector diagonal_;
};

inline DenseVector mat_vec(const DenseMatrix& m, const DenseVector& v) {
  if (m.cols() != v.dim()) {
    throw ContractError("mat_vec: matrix has " + std::to_string(m.cols()) +
                        " columns but vector has dim " + std::to_string(v.dim()));
  }
  DenseVector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

// m^T v without forming the transpose.
inline DenseVector mat_tvec(const DenseMatrix& m, const DenseVector& v) {
  if (m.rows() != v.dim()) {
    throw ContractError("mat_tvec: matrix has " + std::to_string(m.rows()) +
                        " rows but vector has dim " + std::to_string(v.dim()));
  }
  DenseVector out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = v[r];
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c) * s;
  }
  return out;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: lhs has " + std::to_string(a.cols()) +
                        " columns but rhs has " + std::to_string(b.rows()) + " rows");
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(r, k);
      if (s == 0.0) continue;
      for (std::size_t c = 0; c < b.cols(); ++c) out(r, c) += s * b(k, c);
    }
  }
  return out;
}

inline double dot(const DenseVector& a, const DenseVector& b) {
  if (a.dim() != b.dim()) {
    throw ContractError("dot: dims " + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_norm(const DenseVector& v) { return dot(v, v); }

// (1/n) X^T X for X holding one sample per row. The upper triangle is
// computed once and mirrored so the result is symmetric bit-for-bit.
inline DenseMatrix empirical_second_moment(const DenseMatrix& x_rows) {
  const std::size_t n = x_rows.rows();
  const std::size_t d = x_rows.cols();
  if (n == 0) throw EmptySampleError("empirical_second_moment: no samples");
  DenseMatrix out(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += x_rows(r, i) * x_rows(r, j);
      acc /= static_cast<double>(n);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

inline DenseVector diag_apply(const DiagonalMatrix& r, const DenseVector& v) {
  if (r.dim() != v.dim()) {
    throw ContractError("diag_apply: diagonal dim " + std::to_string(r.dim()) +
                        " vs vector dim " + std::to_string(v.dim()));
  }
  DenseVector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = r[i] * v[i];
  return out;
}

}  // namespace preopt
