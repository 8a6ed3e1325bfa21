#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "drmdit/drmdit.hpp"

namespace drmdit::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

enum class Component { md, recon, mi, total };

inline std::string to_string(Component c) {
  switch (c) {
    case Component::md: return "md";
    case Component::recon: return "recon";
    case Component::mi: return "mi";
    case Component::total: return "total";
  }
  return "?";
}

inline LossWeights weights_for(Component c) {
  switch (c) {
    case Component::md: return {1.0, 0.0, 0.0};
    case Component::recon: return {0.0, 1.0, 0.0};
    case Component::mi: return {0.0, 0.0, 1.0};
    case Component::total: return {0.95, 0.05, 1.0};
  }
  return {};
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t params = 0;
};

// Central differences on one loss component. Robust statistics are frozen
// at the unperturbed point, matching how the analytic gradient treats them.
// The 1e-5 denominator floor sits above the central-difference roundoff
// (eps * loss / h) seen on parameters whose true gradient is exactly zero.
inline GradCheck check_gradient(const NetworkParams& params, const Matrix& batch, TrainConfig cfg,
                                Component c, double h = 1e-6) {
  cfg.weights = weights_for(c);
  const LossResult base = joint_loss(params, batch, cfg);
  const RobustLatentStats frozen = base.batch_stats;
  ParamBuffers analytic = base.grads;
  const auto a = parameter_slots(analytic);
  NetworkParams p = params;
  const auto slots = parameter_slots(p);
  GradCheck out;
  out.params = slots.size();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double keep = *slots[i];
    *slots[i] = keep + h;
    const double up = joint_loss(p, batch, cfg, &frozen).breakdown.total;
    *slots[i] = keep - h;
    const double down = joint_loss(p, batch, cfg, &frozen).breakdown.total;
    *slots[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(*a[i]), std::abs(numeric), 1e-5});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(*a[i] - numeric) / denom);
  }
  return out;
}

// Small random network (at most 50 parameters) with random biases.
inline NetworkParams random_small_net(std::mt19937_64& rng, std::uint64_t seed) {
  static const std::vector<std::vector<std::size_t>> shapes{
      {4, 2}, {5, 2}, {4, 3, 2}, {5, 3, 2}, {6, 3, 2}, {3, 2}, {6, 4}, {5, 4, 3}};
  static const std::vector<Activation> acts{Activation::tanh, Activation::sigmoid,
                                            Activation::linear};
  const auto& dims = shapes[rng() % shapes.size()];
  NetworkParams p = init_params(dims, acts[rng() % acts.size()], seed);
  std::normal_distribution<double> g(0.0, 0.2);
  for (auto& b : p.biases_enc)
    for (double& v : b) v = g(rng);
  for (auto& b : p.biases_dec)
    for (double& v : b) v = g(rng);
  return p;
}

}  // namespace drmdit::testing
