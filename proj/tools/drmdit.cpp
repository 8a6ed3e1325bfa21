// drmdit command-line front end: train, score, eval, sweep, synth.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drmdit/drmdit.hpp"

namespace {

using namespace drmdit;

nlohmann::json read_json(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + " " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string(what) + " " + path + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParameterError(std::string("bad ") + what + " value '" + item + "'");
    }
  }
  if (out.empty()) throw ParameterError(std::string("empty ") + what + " list");
  return out;
}

std::optional<ScoreBand> parse_band(const std::string& text) {
  if (text == "auto") return std::nullopt;
  const auto v = parse_list(text, "band");
  if (v.size() != 2) throw ParameterError("band must be 'auto' or 'low,high'");
  ScoreBand b{v[0], v[1]};
  validate(b);
  return b;
}

FeatureConfig feature_config(const std::string& path, const std::string& label_col) {
  FeatureConfig fc = path.empty() ? FeatureConfig{} : load_feature_config(path);
  if (!label_col.empty()) fc.label_column = label_col;
  return fc;
}

FeatureMatrix load(const std::string& path, const FeatureConfig& fc) {
  auto res = load_csv(path, fc);
  if (res.dropped_rows > 0)
    std::cerr << "dropped " << res.dropped_rows << " rows with missing or non-finite values\n";
  return std::move(res.data);
}

FeatureMatrix normal_rows(const FeatureMatrix& data) {
  if (!data.labels) return data;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.rows(); ++i)
    if ((*data.labels)[i] == 0) idx.push_back(i);
  if (idx.empty()) throw DataError("no normal rows to train on");
  FeatureMatrix out = data.subset(idx);
  out.labels.reset();
  out.groups.reset();
  return out;
}

// Normal rows, min-max fitted on them, then optionally skew-filtered.
FeatureMatrix training_rows(const FeatureMatrix& data, bool skew) {
  FeatureMatrix train = normal_rows(data);
  train = apply_minmax(train, fit_minmax(train));
  if (skew) {
    auto f = skew_filter(train);
    std::cerr << "skew filter dropped " << f.dropped << " rows" << (f.widened ? " (cutoff widened)" : "")
              << "\n";
    train = std::move(f.kept);
  }
  return train;
}

TrainConfig load_config(const std::string& path, std::uint64_t seed) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : config_from_json(read_json(path, "config"));
  cfg.seed = seed;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

// Columns the model was trained on, plus the requested label/group columns.
FeatureConfig model_columns(const Model& model, const std::string& label_col,
                            const std::vector<std::string>& normal_values,
                            const std::string& group_col) {
  FeatureConfig fc;
  fc.columns = model.feature_names;
  if (!label_col.empty()) fc.label_column = label_col;
  if (!normal_values.empty()) fc.normal_values = normal_values;
  if (!group_col.empty()) fc.group_column = group_col;
  return fc;
}

void print_summary(const ScoreReport& rep) {
  std::cout << "mode " << to_string(rep.mode) << " band [" << rep.band.low << ", " << rep.band.high
            << "]" << (rep.band_auto ? " (auto)" : "") << "\n";
  if (rep.metrics) {
    std::cout << "accuracy " << rep.metrics->accuracy << " precision " << rep.metrics->precision
              << " recall " << rep.metrics->recall;
    if (rep.auc) std::cout << " auc " << *rep.auc;
    std::cout << "\n";
  }
  for (const auto& [g, r] : rep.group_recall) std::cout << "recall[" << g << "] " << r << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust latent-distance autoencoder anomaly detector"};
  app.require_subcommand(1);
  std::uint64_t seed = 42;
  app.add_option("--seed", seed, "Seed for all randomness")->capture_default_str();

  std::string data_path, features_path, config_path, out_path, model_path, label_col, group_col;
  std::string mode_name = "robust_md";
  std::string band_text;
  std::string sigma_text = "0.05,0.1,0.15,0.2";
  std::string alpha_text;
  std::string spec_path;
  std::vector<std::string> normal_values;
  bool no_skew = false;
  std::size_t sweep_epochs = 0;

  auto* train = app.add_subcommand("train", "Train on the normal rows of a CSV");
  train->add_option("--data", data_path, "Input CSV")->required();
  train->add_option("--features", features_path, "Feature-selection JSON");
  train->add_option("--config", config_path, "Training config JSON");
  train->add_option("--labels", label_col, "Label column; only normal rows are used");
  train->add_flag("--no-skew-filter", no_skew, "Keep rows the skew filter would drop");
  train->add_option("--out", out_path, "Checkpoint path")->required();
  train->add_option("--seed", seed, "Seed for all randomness");

  auto* score = app.add_subcommand("score", "Score a CSV with a trained model");
  score->add_option("--model", model_path, "Checkpoint")->required();
  score->add_option("--data", data_path, "Input CSV")->required();
  score->add_option("--mode", mode_name, "robust_md|classical_md|euclidean_recon")->capture_default_str();
  score->add_option("--band", band_text, "low,high (default 0.01,0.08)");
  score->add_option("--labels", label_col, "Optional label column");
  score->add_option("--out", out_path, "Output prefix")->required();
  score->add_option("--seed", seed, "Seed for all randomness");

  auto* eval = app.add_subcommand("eval", "Score and evaluate a labelled CSV");
  eval->add_option("--model", model_path, "Checkpoint")->required();
  eval->add_option("--data", data_path, "Input CSV")->required();
  eval->add_option("--labels", label_col, "Label column")->required();
  eval->add_option("--normal-values", normal_values, "Label values meaning normal");
  eval->add_option("--groups", group_col, "Optional group column for per-group recall");
  eval->add_option("--band", band_text, "auto or low,high")->required();
  eval->add_option("--mode", mode_name, "robust_md|classical_md|euclidean_recon")->capture_default_str();
  eval->add_option("--out", out_path, "Output prefix")->required();
  eval->add_option("--seed", seed, "Seed for all randomness");

  auto* sweep = app.add_subcommand("sweep", "Grid search over kernel bandwidth and loss weights");
  sweep->add_option("--data", data_path, "Input CSV")->required();
  sweep->add_option("--features", features_path, "Feature-selection JSON");
  sweep->add_option("--config", config_path, "Base training config JSON");
  sweep->add_option("--labels", label_col, "Label column; enables AUC validation");
  sweep->add_option("--sigma", sigma_text, "Comma-separated bandwidths")->capture_default_str();
  sweep->add_option("--alpha", alpha_text, "Comma-separated alphas (beta = 1 - alpha)");
  sweep->add_option("--epochs", sweep_epochs, "Epoch budget per grid point");
  sweep->add_flag("--no-skew-filter", no_skew, "Keep rows the skew filter would drop");
  sweep->add_option("--out", out_path, "Table CSV")->required();
  sweep->add_option("--seed", seed, "Seed for all randomness");

  auto* synth = app.add_subcommand("synth", "Generate a labelled normal/near/far benchmark");
  synth->add_option("--spec", spec_path, "Generator spec JSON");
  synth->add_option("--out", out_path, "Output CSV")->required();
  synth->add_option("--seed", seed, "Seed for all randomness");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      const TrainConfig cfg = load_config(config_path, seed);
      const FeatureMatrix rows = training_rows(load(data_path, feature_config(features_path, label_col)), !no_skew);
      const Model model = fit(rows, cfg);
      save_model(model, out_path);
      const auto& last = model.history.back();
      std::cout << "trained on " << rows.rows() << " rows; final md " << last.md_term << " recon "
                << last.recon_term << " mi " << last.mi_term << "\n";
    } else if (*score) {
      const Model model = load_model(model_path);
      const ScoreMode mode = score_mode_from_string(mode_name);
      const FeatureMatrix raw = load(data_path, model_columns(model, label_col, {}, ""));
      const std::optional<ScoreBand> band = band_text.empty() ? ScoreBand{} : parse_band(band_text);
      if (!band && !raw.labels) throw ParameterError("--band auto needs --labels");
      const ScoreReport rep = build_report(model, prepare_features(model, raw), mode, band);
      emit_report(rep, out_path);
      print_summary(rep);
    } else if (*eval) {
      const Model model = load_model(model_path);
      const ScoreMode mode = score_mode_from_string(mode_name);
      const auto band = parse_band(band_text);
      const FeatureMatrix raw = load(data_path, model_columns(model, label_col, normal_values, group_col));
      const ScoreReport rep = build_report(model, prepare_features(model, raw), mode, band);
      emit_report(rep, out_path);
      print_summary(rep);
    } else if (*sweep) {
      const TrainConfig base = load_config(config_path, seed);
      const FeatureMatrix data = load(data_path, feature_config(features_path, label_col));
      const auto sigmas = parse_list(sigma_text, "sigma");
      std::vector<LossWeights> weights;
      if (alpha_text.empty()) {
        weights.push_back(base.weights);
      } else {
        for (double a : parse_list(alpha_text, "alpha")) weights.push_back({a, 1.0 - a, base.weights.gamma});
      }
      // Train on the normal rows of the training split; validate on the
      // validation split with the training normalization.
      const Splits parts = split(data, 0.7, seed);
      FeatureMatrix tr = normal_rows(parts.train);
      const MinMaxRecord rec = fit_minmax(tr);
      tr = apply_minmax(tr, rec);
      if (!no_skew) tr = skew_filter(tr).kept;
      const FeatureMatrix val = apply_minmax(parts.validation, rec);
      const auto result = grid_search(tr, val, sigmas, weights, base,
                                      sweep_epochs > 0 ? std::optional<std::size_t>(sweep_epochs)
                                                       : std::nullopt);
      std::ostringstream table;
      table << "sigma,alpha,beta,gamma,score,score_kind,best\n";
      for (const auto& row : result.table) {
        const bool best = row.sigma == result.best.sigma && row.weights.alpha == result.best.weights.alpha &&
                          row.weights.beta == result.best.weights.beta;
        const auto f = [](double v) { return drmdit::detail::format_double(v); };
        table << f(row.sigma) << ',' << f(row.weights.alpha) << ',' << f(row.weights.beta) << ','
              << f(row.weights.gamma) << ',' << f(row.score) << ','
              << (row.score_is_auc ? "auc" : "neg_mean_md") << ',' << (best ? 1 : 0) << "\n";
      }
      write_text(out_path, table.str());
      std::cout << "best sigma " << result.best.sigma << " alpha " << result.best.weights.alpha << "\n";
    } else if (*synth) {
      SynthSpec spec = spec_path.empty() ? SynthSpec{} : synth_spec_from_json(read_json(spec_path, "spec"));
      spec.seed = seed;
      const FeatureMatrix data = synth_generate(spec);
      write_csv(out_path, data);
      std::cout << "wrote " << data.rows() << " rows to " << out_path << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
