#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "drmdit/error.hpp"
#include "drmdit/ndmath.hpp"

namespace drmdit {

inline constexpr double kMadFloor = 1e-6;

/// Middle order statistic; mean of the two central values for even n.
inline double median(std::span<const double> values) {
  if (values.empty()) throw ParameterError("median: empty input");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Median absolute deviation about `center`, clamped below at `floor`.
inline double mad_about(std::span<const double> values, double center, double floor = kMadFloor) {
  if (values.empty()) throw ParameterError("mad: empty input");
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - center);
  return std::max(median(dev), floor);
}

inline double mad(std::span<const double> values, double floor = kMadFloor) {
  return mad_about(values, median(values), floor);
}

// Median/MAD location-scale and the MAD-normalized correlation of a latent
// batch. All four fields come from the same batch.
struct RobustLatentStats {
  std::vector<double> medians;
  std::vector<double> mads;
  Matrix corr;
  Matrix corr_inv;

  std::size_t dim() const noexcept { return medians.size(); }
};

struct ClassicalStats {
  std::vector<double> means;
  Matrix cov;
  Matrix cov_inv;

  std::size_t dim() const noexcept { return means.size(); }
};

/// corr(i,j) = (1/N) sum_n (Z(n,i) - med_i)(Z(n,j) - med_j) / (MAD_i MAD_j).
///
/// The diagonal is left as the formula produces it (about 2.2 for Gaussian
/// columns). With `normalize_diagonal` the matrix is rescaled to unit
/// diagonal before inversion.
inline RobustLatentStats robust_correlation(const Matrix& latents, double ridge = kDefaultRidge,
                                            bool normalize_diagonal = false) {
  const std::size_t n = latents.rows();
  const std::size_t k = latents.cols();
  if (n < 2) throw ParameterError("robust_correlation: need at least 2 rows");
  if (k < 1) throw ParameterError("robust_correlation: need at least 1 column");
  if (!all_finite(latents)) throw DataError("robust_correlation: non-finite latent value");

  RobustLatentStats s;
  s.medians.resize(k);
  s.mads.resize(k);
  Matrix centered(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto col = latents.column(j);
    s.medians[j] = median(col);
    s.mads[j] = mad_about(col, s.medians[j]);
    for (std::size_t r = 0; r < n; ++r) centered(r, j) = col[r] - s.medians[j];
  }
  s.corr = Matrix(k, k);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += centered(r, i) * centered(r, j);
      const double v = acc * inv_n / (s.mads[i] * s.mads[j]);
      s.corr(i, j) = v;
      s.corr(j, i) = v;
    }
  }
  if (normalize_diagonal) {
    std::vector<double> root(k);
    for (std::size_t i = 0; i < k; ++i) root[i] = std::sqrt(std::max(s.corr(i, i), 1e-300));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) s.corr(i, j) /= root[i] * root[j];
  }
  s.corr_inv = ridge_inverse(s.corr, ridge);
  return s;
}

namespace detail {

inline std::vector<double> mahalanobis_rows(const Matrix& latents, std::span<const double> center,
                                            const Matrix& precision, const char* who) {
  if (latents.cols() != center.size()) {
    throw ParameterError(std::string(who) + ": latent width " + std::to_string(latents.cols()) +
                         " does not match stats dimension " + std::to_string(center.size()));
  }
  std::vector<double> out(latents.rows());
  std::vector<double> delta(center.size());
  for (std::size_t r = 0; r < latents.rows(); ++r) {
    const auto row = latents.row(r);
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = row[j] - center[j];
    // The ridge can leave slightly negative forms.
    out[r] = std::sqrt(std::max(0.0, quadratic_form(precision, delta)));
  }
  return out;
}

}  // namespace detail

/// sqrt((z - median)^T corr_inv (z - median)) per row.
inline std::vector<double> robust_md(const Matrix& latents, const RobustLatentStats& stats) {
  return detail::mahalanobis_rows(latents, stats.medians, stats.corr_inv, "robust_md");
}

/// Mean/covariance location-scale of a latent set; covariance uses divisor N.
inline ClassicalStats classical_stats(const Matrix& latents, double ridge = kDefaultRidge) {
  const std::size_t n = latents.rows();
  const std::size_t k = latents.cols();
  if (n < 2) throw ParameterError("classical_stats: need at least 2 rows");
  ClassicalStats s;
  s.means.assign(k, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < k; ++j) s.means[j] += latents(r, j);
  for (double& m : s.means) m /= static_cast<double>(n);
  s.cov = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        acc += (latents(r, i) - s.means[i]) * (latents(r, j) - s.means[j]);
      s.cov(i, j) = acc / static_cast<double>(n);
      s.cov(j, i) = s.cov(i, j);
    }
  }
  s.cov_inv = ridge_inverse(s.cov, ridge);
  return s;
}

inline std::vector<double> classical_md(const Matrix& latents, const ClassicalStats& stats) {
  return detail::mahalanobis_rows(latents, stats.means, stats.cov_inv, "classical_md");
}

}  // namespace drmdit
