#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drmdit/error.hpp"

namespace drmdit {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ParameterError("Matrix: data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ParameterError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Read-only transpose of a matrix that shares its storage.
class TransposeView {
 public:
  explicit TransposeView(const Matrix& m) : m_(&m) {}
  std::size_t rows() const noexcept { return m_->cols(); }
  std::size_t cols() const noexcept { return m_->rows(); }
  double operator()(std::size_t i, std::size_t j) const { return (*m_)(j, i); }
  const Matrix& base() const noexcept { return *m_; }

 private:
  const Matrix* m_;
};

inline bool all_finite(const Matrix& m) {
  for (double v : m.values())
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  const std::size_t n = std::min(a.rows(), a.cols());
  for (std::size_t i = 0; i < n; ++i) s += a(i, i);
  return s;
}

// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ParameterError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
    }
  }
  return c;
}

// a * b^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ParameterError("matmul_bt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += ai[p] * bj[p];
      c(i, j) = s;
    }
  }
  return c;
}

// a^T * b
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ParameterError("matmul_at: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t n = 0; n < a.rows(); ++n) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ani = a(n, i);
      if (ani == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += ani * b(n, j);
    }
  }
  return c;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double d = a[p] - b[p];
    s += d * d;
  }
  return s;
}

// Pairwise Gaussian kernel evaluations of a sample set.
struct GramMatrix {
  Matrix raw;
  double sigma = 1.0;
};

// Trace-normalized Gram: X(i,j) = G(i,j) / (N sqrt(G(i,i) G(j,j))).
struct NormalizedGram {
  Matrix mat;
};

namespace detail {

inline void check_kernel_inputs(const Matrix& samples, double sigma, const char* who) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError(std::string(who) + ": sigma must be positive and finite");
  }
  if (samples.rows() < 1 || samples.cols() < 1) {
    throw ParameterError(std::string(who) + ": need at least one sample and one feature");
  }
  if (!all_finite(samples)) throw DataError(std::string(who) + ": non-finite sample value");
}

// exp(-||xi - xj||^2 / (2 sigma^2)) for i <= j, mirrored.
inline Matrix kernel_exponentials(const Matrix& samples, double sigma) {
  const std::size_t n = samples.rows();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::exp(-squared_distance(samples.row(i), samples.row(j)) * inv);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

}  // namespace detail

/// Isotropic Gaussian kernel normalization (2 pi sigma^2)^(-d/2).
inline double gaussian_constant(double sigma, std::size_t dim) {
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * static_cast<double>(dim));
}

/// raw(i,j) = (2 pi sigma^2)^(-d/2) exp(-||xi - xj||^2 / (2 sigma^2)).
inline GramMatrix gaussian_gram(const Matrix& samples, double sigma) {
  detail::check_kernel_inputs(samples, sigma, "gaussian_gram");
  const double c = gaussian_constant(sigma, samples.cols());
  if (!std::isfinite(c) || c <= 0.0) {
    throw DegeneracyError("gaussian_gram: kernel constant not representable for d=" +
                          std::to_string(samples.cols()));
  }
  GramMatrix g{detail::kernel_exponentials(samples, sigma), sigma};
  for (double& v : g.raw.values()) v *= c;
  return g;
}

inline NormalizedGram normalize_gram(const GramMatrix& g) {
  const std::size_t n = g.raw.rows();
  if (n == 0 || g.raw.cols() != n) throw ParameterError("normalize_gram: Gram must be square");
  std::vector<double> root_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = g.raw(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw DegeneracyError("normalize_gram: non-positive diagonal entry at " + std::to_string(i));
    }
    root_diag[i] = std::sqrt(d);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  NormalizedGram out{Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.mat(i, i) = inv_n;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = g.raw(i, j) / (root_diag[i] * root_diag[j]) * inv_n;
      out.mat(i, j) = v;
      out.mat(j, i) = v;
    }
  }
  return out;
}

/// Normalized Gaussian Gram computed without the kernel constant, which
/// cancels in the normalization; avoids overflow of (2 pi sigma^2)^(-d/2)
/// for wide inputs.
inline NormalizedGram normalized_gaussian_gram(const Matrix& samples, double sigma) {
  detail::check_kernel_inputs(samples, sigma, "normalized_gaussian_gram");
  NormalizedGram out{detail::kernel_exponentials(samples, sigma)};
  const double inv_n = 1.0 / static_cast<double>(samples.rows());
  for (double& v : out.mat.values()) v *= inv_n;
  return out;
}

/// (a o b) / tr(a o b).
inline Matrix hadamard_normalized(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ParameterError("hadamard_normalized: shape mismatch");
  }
  if (a.rows() != a.cols()) throw ParameterError("hadamard_normalized: matrices must be square");
  Matrix p(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) p.values()[i] = a.values()[i] * b.values()[i];
  const double t = trace(p);
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DegeneracyError("hadamard_normalized: trace of elementwise product is not positive");
  }
  for (double& v : p.values()) v /= t;
  return p;
}

inline constexpr double kDefaultRidge = 1e-6;

/// (r + epsilon I)^-1 by Gauss-Jordan elimination with partial pivoting.
inline Matrix ridge_inverse(const Matrix& r, double epsilon = kDefaultRidge) {
  const std::size_t n = r.rows();
  if (r.cols() != n) throw ParameterError("ridge_inverse: matrix must be square");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ParameterError("ridge_inverse: epsilon must be non-negative");
  }
  if (!all_finite(r)) throw DataError("ridge_inverse: non-finite entry");
  double scale = 1.0;
  for (double v : r.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(r(i, j) - r(j, i)) > 1e-9 * scale) {
        throw ParameterError("ridge_inverse: matrix is not symmetric");
      }

  Matrix a = r;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += epsilon;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
    if (std::abs(a(piv, col)) < 1e-14) {
      throw SingularityError("ridge_inverse: matrix singular after ridge (column " +
                             std::to_string(col) + ")");
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(col, j), a(piv, j));
        std::swap(inv(col, j), inv(piv, j));
      }
    }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col) continue;
      const double f = a(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(i, j) -= f * a(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  // Elimination leaves rounding-level asymmetry.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = m;
      inv(j, i) = m;
    }
  if (!all_finite(inv)) throw SingularityError("ridge_inverse: inverse is not finite");
  return inv;
}

/// v^T m v for symmetric m.
inline double quadratic_form(const Matrix& m, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) row += m(i, j) * v[j];
    s += v[i] * row;
  }
  return s;
}

}  // namespace drmdit
