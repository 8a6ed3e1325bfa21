#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drmdit/error.hpp"
#include "drmdit/train.hpp"

// Single-document JSON checkpoint. nlohmann::json prints doubles with the
// shortest representation that round-trips, so reloading is exact and
// dumping the same model twice is byte-identical.

namespace drmdit {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw DataError("checkpoint: ragged matrix");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

inline std::string mi_mode_name(MiMode m) { return m == MiMode::ratio ? "ratio" : "additive"; }

inline MiMode mi_mode_from_name(const std::string& s) {
  if (s == "ratio") return MiMode::ratio;
  if (s == "additive") return MiMode::additive;
  throw ParameterError("unknown mi_mode '" + s + "'");
}

}  // namespace detail

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"layer_dims", c.layer_dims},
          {"activation", to_string(c.activation)},
          {"sigma", c.sigma},
          {"latent_sigma", c.latent_sigma},
          {"alpha", c.weights.alpha},
          {"beta", c.weights.beta},
          {"gamma", c.weights.gamma},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"seed", c.seed},
          {"ridge", c.ridge},
          {"mi_mode", detail::mi_mode_name(c.mi_mode)},
          {"normalize_diagonal", c.normalize_diagonal}};
}

/// Missing keys keep the values of `base`.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  try {
    TrainConfig c = base;
    c.layer_dims = j.value("layer_dims", c.layer_dims);
    if (j.contains("activation")) c.activation = activation_from_string(j.at("activation"));
    c.sigma = j.value("sigma", c.sigma);
    c.latent_sigma = j.value("latent_sigma", c.latent_sigma);
    c.weights.alpha = j.value("alpha", c.weights.alpha);
    c.weights.beta = j.value("beta", c.weights.beta);
    c.weights.gamma = j.value("gamma", c.weights.gamma);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.seed = j.value("seed", c.seed);
    c.ridge = j.value("ridge", c.ridge);
    if (j.contains("mi_mode")) c.mi_mode = detail::mi_mode_from_name(j.at("mi_mode"));
    c.normalize_diagonal = j.value("normalize_diagonal", c.normalize_diagonal);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("train config: ") + e.what());
  }
}

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["layer_dims"] = m.params.layer_dims;
  j["activation"] = to_string(m.params.activation);
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : m.params.weights) weights.push_back(detail::matrix_to_json(w));
  j["weights"] = weights;
  j["biases_enc"] = m.params.biases_enc;
  j["biases_dec"] = m.params.biases_dec;
  if (m.robust) {
    j["robust_stats"] = {{"medians", m.robust->medians},
                         {"mads", m.robust->mads},
                         {"corr", detail::matrix_to_json(m.robust->corr)},
                         {"corr_inv", detail::matrix_to_json(m.robust->corr_inv)}};
  }
  if (m.classical) {
    j["classical_stats"] = {{"means", m.classical->means},
                            {"cov", detail::matrix_to_json(m.classical->cov)},
                            {"cov_inv", detail::matrix_to_json(m.classical->cov_inv)}};
  }
  nlohmann::json medians;
  for (ScoreMode mode : kScoreModes) medians[to_string(mode)] = m.train_median(mode);
  j["train_score_medians"] = medians;
  j["feature_names"] = m.feature_names;
  if (m.normalization) {
    j["normalization"] = {{"min", m.normalization->mins},
                          {"max", m.normalization->maxs},
                          {"constant_features", m.normalization->constant_features}};
  }
  j["train_config"] = config_to_json(m.config);
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : m.history) {
    history.push_back({{"md_term", h.md_term},
                       {"recon_term", h.recon_term},
                       {"mi_term", h.mi_term},
                       {"total", h.total}});
  }
  j["loss_history"] = history;
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw DataError("checkpoint: unsupported format_version");
    }
    Model m;
    m.config = config_from_json(j.at("train_config"));
    m.params.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    m.params.activation = activation_from_string(j.at("activation"));
    for (const auto& w : j.at("weights")) m.params.weights.push_back(detail::matrix_from_json(w));
    m.params.biases_enc = j.at("biases_enc").get<std::vector<std::vector<double>>>();
    m.params.biases_dec = j.at("biases_dec").get<std::vector<std::vector<double>>>();
    const std::size_t L = m.params.layer_dims.size();
    if (L < 2 || m.params.weights.size() != L - 1 || m.params.biases_enc.size() != L - 1 ||
        m.params.biases_dec.size() != L - 1) {
      throw DataError("checkpoint: layer count mismatch");
    }
    for (std::size_t l = 0; l + 1 < L; ++l) {
      const auto& w = m.params.weights[l];
      if (w.rows() != m.params.layer_dims[l + 1] || w.cols() != m.params.layer_dims[l] ||
          m.params.biases_enc[l].size() != w.rows() || m.params.biases_dec[l].size() != w.cols()) {
        throw DataError("checkpoint: layer " + std::to_string(l) + " has inconsistent shape");
      }
    }
    if (j.contains("robust_stats")) {
      const auto& r = j.at("robust_stats");
      m.robust = RobustLatentStats{r.at("medians").get<std::vector<double>>(),
                                   r.at("mads").get<std::vector<double>>(),
                                   detail::matrix_from_json(r.at("corr")),
                                   detail::matrix_from_json(r.at("corr_inv"))};
    }
    if (j.contains("classical_stats")) {
      const auto& c = j.at("classical_stats");
      m.classical = ClassicalStats{c.at("means").get<std::vector<double>>(),
                                   detail::matrix_from_json(c.at("cov")),
                                   detail::matrix_from_json(c.at("cov_inv"))};
    }
    if (j.contains("train_score_medians")) {
      const auto& med = j.at("train_score_medians");
      for (ScoreMode mode : kScoreModes)
        m.train_score_medians[static_cast<int>(mode)] = med.value(to_string(mode), 0.0);
    }
    m.feature_names = j.value("feature_names", std::vector<std::string>{});
    if (j.contains("normalization")) {
      const auto& n = j.at("normalization");
      m.normalization = MinMaxRecord{n.at("min").get<std::vector<double>>(),
                                     n.at("max").get<std::vector<double>>(),
                                     n.value("constant_features", std::vector<std::string>{})};
    }
    for (const auto& h : j.value("loss_history", nlohmann::json::array())) {
      m.history.push_back({h.at("md_term").get<double>(), h.at("recon_term").get<double>(),
                           h.at("mi_term").get<double>(), h.at("total").get<double>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline std::string dump_model(const Model& m) { return model_to_json(m).dump(1) + "\n"; }

inline void save_model(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << dump_model(m);
  if (!out) throw DataError("write failed for " + path.string());
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace drmdit
