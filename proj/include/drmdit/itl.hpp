#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "drmdit/error.hpp"
#include "drmdit/ndmath.hpp"

// Nonparametric Renyi order-2 estimators.
//
// Sample-based quantities use natural logs over information potentials
// (mean pairwise Gaussian kernel with bandwidth sqrt(2) sigma). Matrix-based
// quantities use log2 over trace-normalized Gram matrices. The two are never
// mixed.

namespace drmdit {

enum class LogBase { natural, log2 };
enum class EntropyKind { sample, matrix };

struct EntropyValue {
  double value = 0.0;
  LogBase basis = LogBase::natural;
  EntropyKind kind = EntropyKind::sample;
};

struct MiValue {
  double value = 0.0;
  double hx = 0.0;
  double hz = 0.0;
  double hxz = 0.0;
};

enum class MiMode { ratio, additive };

inline constexpr double kEntropyFloor = 1e-3;

/// (1/(Nx Nz)) sum_i sum_j G_{sqrt(2) sigma}(x_i - z_j), with the full
/// isotropic kernel constant.
inline double information_potential(const Matrix& x, const Matrix& z, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("information_potential: sigma must be positive and finite");
  }
  if (x.rows() == 0 || z.rows() == 0) throw ParameterError("information_potential: empty set");
  if (x.cols() != z.cols()) {
    throw ParameterError("information_potential: dimension mismatch " +
                         std::to_string(x.cols()) + " vs " + std::to_string(z.cols()));
  }
  if (!all_finite(x) || !all_finite(z)) throw DataError("information_potential: non-finite value");
  const double s2 = std::numbers::sqrt2 * sigma;
  const double c = gaussian_constant(s2, x.cols());
  const double inv = 1.0 / (2.0 * s2 * s2);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < z.rows(); ++j)
      row += std::exp(-squared_distance(x.row(i), z.row(j)) * inv);
    acc += row;
  }
  const double ip = c * acc / (static_cast<double>(x.rows()) * static_cast<double>(z.rows()));
  if (!(ip > 0.0) || !std::isfinite(ip)) {
    throw DegeneracyError("information_potential: potential underflowed or overflowed");
  }
  return ip;
}

inline EntropyValue renyi2_sample(const Matrix& samples, double sigma) {
  return {-std::log(information_potential(samples, samples, sigma)), LogBase::natural,
          EntropyKind::sample};
}

inline EntropyValue joint_entropy_sample(const Matrix& x, const Matrix& z, double sigma) {
  return {-std::log(information_potential(x, z, sigma)), LogBase::natural, EntropyKind::sample};
}

/// -log(CIP / sqrt(IP_x IP_z)); zero for identical sets.
inline double cs_divergence_sample(const Matrix& x, const Matrix& z, double sigma) {
  const double cross = information_potential(x, z, sigma);
  const double self_x = information_potential(x, x, sigma);
  const double self_z = information_potential(z, z, sigma);
  return -std::log(cross / (std::sqrt(self_x) * std::sqrt(self_z)));
}

/// -log2 tr(X^2) for symmetric X, i.e. -log2 of the sum of squared entries,
/// clamped to the attainable range [0, log2 N].
inline EntropyValue renyi2_matrix(const NormalizedGram& g) {
  const std::size_t n = g.mat.rows();
  if (n == 0 || g.mat.cols() != n) throw ParameterError("renyi2_matrix: Gram must be square");
  double sq = 0.0;
  for (double v : g.mat.values()) sq += v * v;
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw DegeneracyError("renyi2_matrix: trace of squared Gram is not positive");
  }
  const double h = std::clamp(-std::log2(sq), 0.0, std::log2(static_cast<double>(n)));
  return {h, LogBase::log2, EntropyKind::matrix};
}

inline EntropyValue joint_entropy_matrix(const NormalizedGram& gx, const NormalizedGram& gz) {
  if (gx.mat.rows() != gz.mat.rows()) {
    throw ParameterError("joint_entropy_matrix: sample counts differ");
  }
  return renyi2_matrix(NormalizedGram{hadamard_normalized(gx.mat, gz.mat)});
}

namespace detail {

inline void require_matrix_bits(const EntropyValue& h, const char* name) {
  if (h.basis != LogBase::log2 || h.kind != EntropyKind::matrix) {
    throw ParameterError(std::string("mutual information: ") + name +
                         " must be a matrix-based log2 entropy");
  }
}

}  // namespace detail

/// log2(Hx Hz / Hxz^2) over entropy values clamped at kEntropyFloor.
inline MiValue mi_cs(const EntropyValue& hx, const EntropyValue& hz, const EntropyValue& hxz) {
  detail::require_matrix_bits(hx, "H(X)");
  detail::require_matrix_bits(hz, "H(Z)");
  detail::require_matrix_bits(hxz, "H(X,Z)");
  MiValue mi;
  mi.hx = std::max(hx.value, kEntropyFloor);
  mi.hz = std::max(hz.value, kEntropyFloor);
  mi.hxz = std::max(hxz.value, kEntropyFloor);
  mi.value = std::log2(mi.hx * mi.hz / (mi.hxz * mi.hxz));
  return mi;
}

/// Hx + Hz - Hxz, the additive matrix-based mutual information.
inline MiValue mi_additive(const EntropyValue& hx, const EntropyValue& hz,
                           const EntropyValue& hxz) {
  detail::require_matrix_bits(hx, "H(X)");
  detail::require_matrix_bits(hz, "H(Z)");
  detail::require_matrix_bits(hxz, "H(X,Z)");
  MiValue mi;
  mi.hx = std::max(hx.value, kEntropyFloor);
  mi.hz = std::max(hz.value, kEntropyFloor);
  mi.hxz = std::max(hxz.value, kEntropyFloor);
  mi.value = mi.hx + mi.hz - mi.hxz;
  return mi;
}

inline MiValue mutual_information(MiMode mode, const EntropyValue& hx, const EntropyValue& hz,
                                  const EntropyValue& hxz) {
  return mode == MiMode::ratio ? mi_cs(hx, hz, hxz) : mi_additive(hx, hz, hxz);
}

/// Sum of per-column sample entropies minus the joint sample entropy of the rows.
inline double total_correlation(const Matrix& m, double sigma) {
  if (m.cols() < 1) throw ParameterError("total_correlation: need at least one feature");
  double marginals = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    Matrix col(m.rows(), 1, m.column(j));
    marginals += renyi2_sample(col, sigma).value;
  }
  return marginals - renyi2_sample(m, sigma).value;
}

}  // namespace drmdit
