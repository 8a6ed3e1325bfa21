#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drmdit/autoenc.hpp"
#include "drmdit/data.hpp"
#include "drmdit/error.hpp"
#include "drmdit/itl.hpp"
#include "drmdit/metrics.hpp"
#include "drmdit/ndmath.hpp"
#include "drmdit/robust.hpp"

namespace drmdit {

// alpha weighs the robust-MD term, beta the reconstruction term and gamma
// the mutual-information term (which is maximized).
struct LossWeights {
  double alpha = 0.95;
  double beta = 0.05;
  double gamma = 1.0;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double md_term = 0.0;
  double recon_term = 0.0;
  double mi_term = 0.0;
  double total = 0.0;
};

struct TrainConfig {
  std::vector<std::size_t> layer_dims;  // empty: d -> d/2 -> 8
  Activation activation = Activation::tanh;
  double sigma = 0.1;
  double latent_sigma = 0.0;  // 0: share the input bandwidth
  LossWeights weights;
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 42;
  double ridge = kDefaultRidge;
  MiMode mi_mode = MiMode::ratio;
  bool normalize_diagonal = false;

  double effective_latent_sigma() const { return latent_sigma > 0.0 ? latent_sigma : sigma; }
};

inline constexpr std::size_t kDefaultLatentDim = 8;

inline std::vector<std::size_t> default_layer_dims(std::size_t input_dim) {
  return {input_dim, std::max<std::size_t>(1, input_dim / 2), kDefaultLatentDim};
}

inline void validate(const LossWeights& w) {
  const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(w.alpha) || !ok(w.beta) || !ok(w.gamma)) {
    throw ParameterError("loss weights must be finite and non-negative");
  }
  if (w.alpha > 1.0 || w.beta > 1.0) throw ParameterError("alpha and beta must lie in [0,1]");
}

inline void validate(const TrainConfig& c) {
  validate(c.weights);
  if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) throw ParameterError("sigma must be positive");
  if (c.latent_sigma < 0.0 || !std::isfinite(c.latent_sigma)) {
    throw ParameterError("latent_sigma must be non-negative");
  }
  if (c.batch_size < 2) throw ParameterError("batch_size must be at least 2");
  if (!(c.learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    throw ParameterError("adam betas must lie in [0,1)");
  }
  if (!(c.adam_epsilon > 0.0)) throw ParameterError("adam epsilon must be positive");
  if (!(c.ridge >= 0.0)) throw ParameterError("ridge must be non-negative");
}

struct LossResult {
  LossBreakdown breakdown;
  ParamBuffers grads;
  RobustLatentStats batch_stats;
  MiValue mi;
};

namespace detail {

inline bool rows_identical(const Matrix& x) {
  for (std::size_t r = 1; r < x.rows(); ++r)
    if (!std::equal(x.row(r).begin(), x.row(r).end(), x.row(0).begin())) return false;
  return true;
}

// d MI / d latent for the matrix-based estimator. Only the latent Gram
// depends on the parameters; its diagonal is constant.
inline Matrix mi_latent_gradient(const Matrix& latent, const NormalizedGram& gx,
                                 const NormalizedGram& gz, const MiValue& mi, MiMode mode,
                                 double latent_sigma) {
  const std::size_t n = latent.rows();
  const std::size_t k = latent.cols();
  const Matrix& a = gz.mat;
  const Matrix& b = gx.mat;
  double s_z = 0.0;
  double s_xz = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double av = a.values()[i];
    const double bv = b.values()[i];
    s_z += av * av;
    s_xz += av * av * bv * bv;
  }
  // Entropies that sat on the floor contribute no gradient.
  const bool hz_live = mi.hz > kEntropyFloor;
  const bool hxz_live = mi.hxz > kEntropyFloor;
  double d_hz = 0.0;
  double d_hxz = 0.0;
  if (mode == MiMode::ratio) {
    if (hz_live) d_hz = 1.0 / (mi.hz * std::numbers::ln2);
    if (hxz_live) d_hxz = -2.0 / (mi.hxz * std::numbers::ln2);
  } else {
    if (hz_live) d_hz = 1.0;
    if (hxz_live) d_hxz = -1.0;
  }
  const double cz = -2.0 / (s_z * std::numbers::ln2);
  const double cxz = -2.0 / (s_xz * std::numbers::ln2);
  const double inv_s2 = 1.0 / (latent_sigma * latent_sigma);

  Matrix grad(n, k);
  std::vector<double> acc(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double wsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double aij = a(i, j);
      const double bij = b(i, j);
      const double g = d_hz * cz * aij + d_hxz * cxz * aij * bij * bij;
      const double w = g * aij;
      wsum += w;
      const auto zj = latent.row(j);
      for (std::size_t c = 0; c < k; ++c) acc[c] += w * zj[c];
    }
    const auto zi = latent.row(i);
    for (std::size_t c = 0; c < k; ++c) grad(i, c) = -2.0 * inv_s2 * (zi[c] * wsum - acc[c]);
  }
  return grad;
}

}  // namespace detail

/// Joint objective on one batch:
///   total = alpha * mean robust MD + beta * MSE - gamma * MI(X; Z)
/// with parameter gradients. Robust statistics are computed from the
/// batch's own latents (or taken from `frozen`) and treated as constants
/// for differentiation. MI uses matrix-based Renyi entropies of the input
/// and latent Gram matrices.
inline LossResult joint_loss(const NetworkParams& params, const Matrix& batch,
                             const TrainConfig& config,
                             const RobustLatentStats* frozen = nullptr) {
  const std::size_t n = batch.rows();
  if (n < 2) throw ParameterError("joint_loss: need at least 2 rows");
  if (detail::rows_identical(batch)) {
    throw DegeneracyError(
        "joint_loss: degenerate batch, all rows identical (latent MAD is zero in every "
        "dimension)");
  }
  const ForwardTrace trace = forward(params, batch);
  const Matrix& z = trace.latent();
  const Matrix& recon = trace.reconstruction();
  const std::size_t d = batch.cols();
  const std::size_t k = z.cols();
  const LossWeights& w = config.weights;

  LossResult res;
  res.batch_stats =
      frozen ? *frozen : robust_correlation(z, config.ridge, config.normalize_diagonal);
  const RobustLatentStats& stats = res.batch_stats;

  Matrix grad_z(n, k);
  Matrix grad_r(n, d);

  // Robust MD.
  const auto md = robust_md(z, stats);
  res.breakdown.md_term = std::accumulate(md.begin(), md.end(), 0.0) / static_cast<double>(n);
  std::vector<double> delta(k);
  for (std::size_t r = 0; r < n; ++r) {
    if (md[r] <= 0.0) continue;
    for (std::size_t c = 0; c < k; ++c) delta[c] = z(r, c) - stats.medians[c];
    for (std::size_t c = 0; c < k; ++c) {
      double cd = 0.0;
      for (std::size_t e = 0; e < k; ++e) cd += stats.corr_inv(c, e) * delta[e];
      grad_z(r, c) += w.alpha * cd / (md[r] * static_cast<double>(n));
    }
  }

  // Reconstruction MSE.
  const double inv_nd = 1.0 / static_cast<double>(n * d);
  double sse = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double diff = recon.values()[i] - batch.values()[i];
    sse += diff * diff;
    grad_r.values()[i] = w.beta * 2.0 * diff * inv_nd;
  }
  res.breakdown.recon_term = sse * inv_nd;

  // Mutual information between input and latent spaces.
  const double latent_sigma = config.effective_latent_sigma();
  const NormalizedGram gx = normalized_gaussian_gram(batch, config.sigma);
  const NormalizedGram gz = normalized_gaussian_gram(z, latent_sigma);
  res.mi = mutual_information(config.mi_mode, renyi2_matrix(gx), renyi2_matrix(gz),
                              joint_entropy_matrix(gx, gz));
  res.breakdown.mi_term = res.mi.value;
  if (w.gamma != 0.0) {
    const Matrix g_mi = detail::mi_latent_gradient(z, gx, gz, res.mi, config.mi_mode, latent_sigma);
    for (std::size_t i = 0; i < g_mi.size(); ++i) grad_z.values()[i] -= w.gamma * g_mi.values()[i];
  }

  res.breakdown.total = w.alpha * res.breakdown.md_term + w.beta * res.breakdown.recon_term -
                        w.gamma * res.breakdown.mi_term;
  if (!std::isfinite(res.breakdown.total)) throw NumericError("joint_loss: non-finite loss");

  res.grads = ParamBuffers::zeros_like(params);
  backward(params, trace, grad_z, grad_r, res.grads);
  return res;
}

/// Reciprocal mean-absolute-deviation weighting, rescaled to alpha + beta = 1.
/// Falls back to (0.95, 0.05) when either deviation is zero.
inline LossWeights auto_weights(std::span<const double> validation_md,
                                std::span<const double> validation_recon, double gamma = 1.0) {
  if (validation_md.empty() || validation_recon.empty()) {
    throw ParameterError("auto_weights: empty validation vectors");
  }
  const auto mean_abs_dev = [](std::span<const double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += std::abs(x - mean);
    return s / static_cast<double>(v.size());
  };
  const double dev_md = mean_abs_dev(validation_md);
  const double dev_rec = mean_abs_dev(validation_recon);
  if (!(dev_md > 0.0) || !(dev_rec > 0.0)) return {0.95, 0.05, gamma};
  const double a = 1.0 / dev_md;
  const double b = 1.0 / dev_rec;
  return {a / (a + b), b / (a + b), gamma};
}

struct AdamState {
  ParamBuffers m;
  ParamBuffers v;
  std::uint64_t step = 0;

  static AdamState for_params(const NetworkParams& p) {
    return {ParamBuffers::zeros_like(p), ParamBuffers::zeros_like(p), 0};
  }
};

/// Bias-corrected Adam update.
inline void adam_step(NetworkParams& params, ParamBuffers& grads, AdamState& state,
                      const TrainConfig& config) {
  grads.for_each([](double& g, const std::string& path) {
    if (!std::isfinite(g)) throw TrainingError("adam_step: non-finite gradient at " + path);
  });
  auto p = parameter_slots(params);
  auto g = parameter_slots(grads);
  auto m = parameter_slots(state.m);
  auto v = parameter_slots(state.v);
  if (p.size() != g.size() || p.size() != m.size()) {
    throw ParameterError("adam_step: gradient/parameter shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.adam_beta1, t);
  const double c2 = 1.0 - std::pow(config.adam_beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    *m[i] = config.adam_beta1 * *m[i] + (1.0 - config.adam_beta1) * *g[i];
    *v[i] = config.adam_beta2 * *v[i] + (1.0 - config.adam_beta2) * *g[i] * *g[i];
    *p[i] -= config.learning_rate * (*m[i] / c1) / (std::sqrt(*v[i] / c2) + config.adam_epsilon);
  }
}

enum class ScoreMode { robust_md, classical_md, euclidean_recon };

inline std::string to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::robust_md: return "robust_md";
    case ScoreMode::classical_md: return "classical_md";
    case ScoreMode::euclidean_recon: return "euclidean_recon";
  }
  return "unknown";
}

inline ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "robust_md") return ScoreMode::robust_md;
  if (s == "classical_md") return ScoreMode::classical_md;
  if (s == "euclidean_recon") return ScoreMode::euclidean_recon;
  throw ParameterError("unknown scoring mode '" + s + "'");
}

inline constexpr std::array<ScoreMode, 3> kScoreModes{ScoreMode::robust_md, ScoreMode::classical_md,
                                                      ScoreMode::euclidean_recon};

// A trained detector: network, statistics frozen from the full training
// set after the last epoch, and the per-mode median training score used to
// fold scores for ranking.
struct Model {
  TrainConfig config;
  NetworkParams params;
  std::optional<RobustLatentStats> robust;
  std::optional<ClassicalStats> classical;
  std::vector<std::string> feature_names;
  std::optional<MinMaxRecord> normalization;
  std::vector<LossBreakdown> history;
  std::array<double, 3> train_score_medians{0.0, 0.0, 0.0};

  double train_median(ScoreMode m) const { return train_score_medians[static_cast<int>(m)]; }
};

/// Per-row scores of already-normalized features.
inline std::vector<double> score_matrix(const Model& model, const Matrix& x, ScoreMode mode) {
  const ForwardTrace t = forward(model.params, x);
  switch (mode) {
    case ScoreMode::robust_md:
      if (!model.robust) throw ParameterError("score: model has no robust statistics");
      return robust_md(t.latent(), *model.robust);
    case ScoreMode::classical_md:
      if (!model.classical) throw ParameterError("score: model has no classical statistics");
      return classical_md(t.latent(), *model.classical);
    case ScoreMode::euclidean_recon: {
      std::vector<double> out(x.rows());
      const Matrix& r = t.reconstruction();
      for (std::size_t i = 0; i < x.rows(); ++i)
        out[i] = squared_distance(r.row(i), x.row(i)) / static_cast<double>(x.cols());
      return out;
    }
  }
  throw ParameterError("score: unknown mode");
}

/// Encodes the full training set once and freezes every scoring statistic.
inline void freeze_statistics(Model& model, const Matrix& train) {
  const Matrix z = encode(model.params, train);
  model.robust = robust_correlation(z, model.config.ridge, model.config.normalize_diagonal);
  model.classical = classical_stats(z, model.config.ridge);
  for (ScoreMode m : kScoreModes)
    model.train_score_medians[static_cast<int>(m)] = median(score_matrix(model, train, m));
}

namespace detail {

[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& where) {
  const std::string msg = std::string(e.what()) + " (" + where + ")";
  if (dynamic_cast<const DegeneracyError*>(&e)) throw DegeneracyError(msg);
  if (dynamic_cast<const NumericError*>(&e)) throw TrainingError(msg);
  if (dynamic_cast<const DataError*>(&e)) throw DataError(msg);
  throw ParameterError(msg);
}

}  // namespace detail

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown&)>;

/// Mini-batch Adam training on normal data. Each epoch reshuffles the rows
/// and splits them into floor(N / batch_size) batches of near-equal size.
inline Model fit(const FeatureMatrix& train, const TrainConfig& config,
                 const EpochCallback& on_epoch = {}) {
  validate(config);
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  if (n < config.batch_size) {
    throw ParameterError("fit: " + std::to_string(n) + " training rows is fewer than batch_size " +
                         std::to_string(config.batch_size));
  }
  if (!all_finite(train.features)) throw DataError("fit: non-finite training feature");
  Model model;
  model.config = config;
  if (model.config.layer_dims.empty()) model.config.layer_dims = default_layer_dims(d);
  if (model.config.layer_dims.front() != d) {
    throw ParameterError("fit: first layer width " + std::to_string(model.config.layer_dims.front()) +
                         " does not match " + std::to_string(d) + " features");
  }
  model.feature_names = train.feature_names;
  model.normalization = train.normalization;
  model.params = init_params(model.config.layer_dims, config.activation, config.seed);

  AdamState adam = AdamState::for_params(model.params);
  std::mt19937_64 rng(config.seed + 1);
  std::vector<std::size_t> order(n);
  const std::size_t batches = n / config.batch_size;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown mean;
    std::size_t start = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t len = n / batches + (b < n % batches ? 1 : 0);
      Matrix batch(len, d);
      for (std::size_t r = 0; r < len; ++r) {
        const auto src = train.features.row(order[start + r]);
        std::copy(src.begin(), src.end(), batch.row(r).begin());
      }
      start += len;
      try {
        LossResult res = joint_loss(model.params, batch, model.config);
        adam_step(model.params, res.grads, adam, model.config);
        mean.md_term += res.breakdown.md_term;
        mean.recon_term += res.breakdown.recon_term;
        mean.mi_term += res.breakdown.mi_term;
      } catch (const Error& e) {
        detail::rethrow_with_context(
            e, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
    }
    const double inv = 1.0 / static_cast<double>(batches);
    mean.md_term *= inv;
    mean.recon_term *= inv;
    mean.mi_term *= inv;
    const LossWeights& w = model.config.weights;
    mean.total = w.alpha * mean.md_term + w.beta * mean.recon_term - w.gamma * mean.mi_term;
    model.history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  freeze_statistics(model, train.features);
  return model;
}

struct GridRow {
  double sigma = 0.0;
  LossWeights weights;
  double score = 0.0;
  bool score_is_auc = false;
};

struct GridResult {
  TrainConfig best;
  std::vector<GridRow> table;
};

inline const std::vector<double> kDefaultSigmaGrid{0.05, 0.1, 0.15, 0.2};

/// Validation score of a trained model: folded robust-MD AUC when both
/// classes are labelled, otherwise the negated mean robust MD of the
/// validation rows (closer to the learned normal manifold is better).
inline std::pair<double, bool> validation_score(const Model& model, const FeatureMatrix& validation) {
  const auto md = score_matrix(model, validation.features, ScoreMode::robust_md);
  if (validation.labels) {
    const auto& y = *validation.labels;
    const bool pos = std::any_of(y.begin(), y.end(), [](int v) { return v != 0; });
    const bool neg = std::any_of(y.begin(), y.end(), [](int v) { return v == 0; });
    if (pos && neg) return {auc(fold_scores(md, model.train_median(ScoreMode::robust_md)), y), true};
  }
  return {-std::accumulate(md.begin(), md.end(), 0.0) / static_cast<double>(md.size()), false};
}

/// Joint grid over bandwidth and loss weights with a short epoch budget.
/// Ties go to the smaller sigma, then the larger alpha.
inline GridResult grid_search(const FeatureMatrix& train, const FeatureMatrix& validation,
                              const std::vector<double>& sigma_grid,
                              const std::vector<LossWeights>& weight_grid, const TrainConfig& base,
                              std::optional<std::size_t> epochs = std::nullopt) {
  if (sigma_grid.empty() || weight_grid.empty()) throw ParameterError("grid_search: empty grid");
  if (validation.rows() == 0) throw ParameterError("grid_search: empty validation set");
  GridResult result;
  std::optional<GridRow> best;
  for (double sigma : sigma_grid) {
    for (const LossWeights& w : weight_grid) {
      TrainConfig cfg = base;
      cfg.sigma = sigma;
      cfg.weights = w;
      if (epochs) cfg.epochs = *epochs;
      const Model m = fit(train, cfg);
      const auto [score, is_auc] = validation_score(m, validation);
      GridRow row{sigma, w, score, is_auc};
      result.table.push_back(row);
      const bool better =
          !best || row.score > best->score ||
          (row.score == best->score &&
           (row.sigma < best->sigma ||
            (row.sigma == best->sigma && row.weights.alpha > best->weights.alpha)));
      if (better) {
        best = row;
        result.best = cfg;
        result.best.epochs = base.epochs;
      }
    }
  }
  return result;
}

}  // namespace drmdit
