#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "drmdit/error.hpp"
#include "drmdit/ndmath.hpp"
#include "drmdit/robust.hpp"

namespace drmdit {

struct MinMaxRecord {
  std::vector<double> mins;
  std::vector<double> maxs;
  // Names of features that were constant in the fitting set.
  std::vector<std::string> constant_features;
};

// N x d flow features with optional binary labels (0 normal, 1 anomaly)
// and optional free-form group tags (e.g. normal/near/far).
struct FeatureMatrix {
  Matrix features;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::string>> groups;
  std::vector<std::string> feature_names;
  std::optional<MinMaxRecord> normalization;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t cols() const noexcept { return features.cols(); }

  FeatureMatrix subset(const std::vector<std::size_t>& idx) const {
    FeatureMatrix out;
    out.feature_names = feature_names;
    out.normalization = normalization;
    out.features = Matrix(idx.size(), cols());
    if (labels) out.labels.emplace();
    if (groups) out.groups.emplace();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto src = features.row(idx[r]);
      std::copy(src.begin(), src.end(), out.features.row(r).begin());
      if (labels) out.labels->push_back((*labels)[idx[r]]);
      if (groups) out.groups->push_back((*groups)[idx[r]]);
    }
    return out;
  }
};

// Column selection for CSV ingestion.
struct FeatureConfig {
  std::vector<std::string> columns;  // empty: every column except label/group
  std::optional<std::string> label_column;
  std::vector<std::string> normal_values{"normal", "Normal", "BENIGN", "Benign", "benign", "0"};
  std::optional<std::string> group_column;
};

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
  FeatureConfig c;
  if (j.contains("columns")) c.columns = j.at("columns").get<std::vector<std::string>>();
  if (j.contains("label_column") && !j.at("label_column").is_null())
    c.label_column = j.at("label_column").get<std::string>();
  if (j.contains("normal_values"))
    c.normal_values = j.at("normal_values").get<std::vector<std::string>>();
  if (j.contains("group_column") && !j.at("group_column").is_null())
    c.group_column = j.at("group_column").get<std::string>();
  return c;
}

inline FeatureConfig load_feature_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature config " + path.string());
  try {
    return feature_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("feature config " + path.string() + ": " + e.what());
  }
}

struct CsvLoad {
  FeatureMatrix data;
  std::size_t dropped_rows = 0;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Comma split with double-quoted fields.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_finite(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a headed, comma-separated file. Rows whose selected values are not
/// finite numbers are dropped and counted; row order is otherwise preserved.
inline CsvLoad load_csv(const std::filesystem::path& path, const FeatureConfig& config = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  if (header.empty() || (header.size() == 1 && header[0].empty())) {
    throw DataError(path.string() + ": missing header row");
  }

  const auto find_column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::optional<std::size_t> label_idx;
  std::optional<std::size_t> group_idx;
  if (config.label_column) label_idx = find_column(*config.label_column);
  if (config.group_column) group_idx = find_column(*config.group_column);

  // Without an explicit list, features are the columns other than label and
  // group whose value in the first data row is numeric.
  std::string first;
  while (std::getline(in, first)) {
    if (!first.empty() && first.back() == '\r') first.pop_back();
    if (!detail::trim(first).empty()) break;
    first.clear();
  }
  const auto first_fields = detail::split_csv_line(first);

  std::vector<std::size_t> cols;
  CsvLoad result;
  if (config.columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == label_idx || i == group_idx) continue;
      if (!first.empty() && (i >= first_fields.size() || !detail::parse_finite(first_fields[i])))
        continue;
      cols.push_back(i);
      result.data.feature_names.push_back(header[i]);
    }
  } else {
    for (const auto& name : config.columns) {
      cols.push_back(find_column(name));
      result.data.feature_names.push_back(name);
    }
  }
  if (cols.empty()) throw DataError(path.string() + ": no feature columns selected");

  const std::set<std::string> normal(config.normal_values.begin(), config.normal_values.end());
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> groups;
  std::size_t n = 0;
  bool pending = !first.empty();
  while (pending || std::getline(in, line)) {
    if (pending) {
      line = first;
      pending = false;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    bool ok = true;
    std::vector<double> row;
    row.reserve(cols.size());
    for (std::size_t c : cols) {
      const auto v = c < fields.size() ? detail::parse_finite(fields[c]) : std::nullopt;
      if (!v) {
        ok = false;
        break;
      }
      row.push_back(*v);
    }
    if (ok && label_idx && *label_idx >= fields.size()) ok = false;
    if (ok && group_idx && *group_idx >= fields.size()) ok = false;
    if (!ok) {
      ++result.dropped_rows;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    if (label_idx) labels.push_back(normal.count(fields[*label_idx]) ? 0 : 1);
    if (group_idx) groups.push_back(fields[*group_idx]);
    ++n;
  }
  if (n == 0) throw DataError(path.string() + ": no usable rows");
  result.data.features = Matrix(n, cols.size(), std::move(values));
  if (label_idx) result.data.labels = std::move(labels);
  if (group_idx) result.data.groups = std::move(groups);
  return result;
}

/// Writes features (and labels/groups when present) with a header row.
inline void write_csv(const std::filesystem::path& path, const FeatureMatrix& data,
                      const std::string& label_column = "label",
                      const std::string& group_column = "group") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t j = 0; j < data.cols(); ++j) out << (j ? "," : "") << data.feature_names[j];
  if (data.labels) out << ',' << label_column;
  if (data.groups) out << ',' << group_column;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t j = 0; j < data.cols(); ++j) out << (j ? "," : "") << data.features(r, j);
    if (data.labels) out << ',' << (*data.labels)[r];
    if (data.groups) out << ',' << (*data.groups)[r];
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

inline MinMaxRecord fit_minmax(const FeatureMatrix& train) {
  if (train.rows() == 0) throw ParameterError("fit_minmax: empty training set");
  MinMaxRecord rec;
  rec.mins.assign(train.cols(), 0.0);
  rec.maxs.assign(train.cols(), 0.0);
  for (std::size_t j = 0; j < train.cols(); ++j) {
    const auto col = train.features.column(j);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    rec.mins[j] = *lo;
    rec.maxs[j] = *hi;
    if (*lo == *hi) {
      rec.constant_features.push_back(j < train.feature_names.size() ? train.feature_names[j]
                                                                     : std::to_string(j));
    }
  }
  return rec;
}

/// (x - min) / (max - min) per feature; constant features map to 0. Values
/// outside the training range extrapolate unless `clamp` is set.
inline FeatureMatrix apply_minmax(const FeatureMatrix& data, const MinMaxRecord& rec,
                                  bool clamp = false) {
  if (rec.mins.size() != data.cols() || rec.maxs.size() != data.cols()) {
    throw ParameterError("apply_minmax: record has " + std::to_string(rec.mins.size()) +
                         " features, data has " + std::to_string(data.cols()));
  }
  FeatureMatrix out = data;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double span = rec.maxs[j] - rec.mins[j];
      double v = span > 0.0 ? (data.features(r, j) - rec.mins[j]) / span : 0.0;
      if (clamp) v = std::clamp(v, 0.0, 1.0);
      out.features(r, j) = v;
    }
  }
  out.normalization = rec;
  return out;
}

struct SkewStats {
  std::vector<double> medians;
  std::vector<double> mads;
  double cutoff = 6.0;  // in MADs
};

struct SkewFilterResult {
  FeatureMatrix kept;
  std::size_t dropped = 0;
  bool widened = false;  // cutoff raised to respect the 10% drop cap
  SkewStats stats;
};

inline constexpr double kSkewCutoff = 6.0;
inline constexpr double kSkewMaxDropFraction = 0.10;

namespace detail {

inline std::vector<double> skew_ratios(const Matrix& x, const SkewStats& s) {
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j)
      out[r] = std::max(out[r], std::abs(x(r, j) - s.medians[j]) / s.mads[j]);
  return out;
}

inline SkewFilterResult keep_within(const FeatureMatrix& data, const std::vector<double>& ratio,
                                    SkewStats stats, bool widened) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < ratio.size(); ++r)
    if (ratio[r] <= stats.cutoff) keep.push_back(r);
  SkewFilterResult res{data.subset(keep), data.rows() - keep.size(), widened, std::move(stats)};
  return res;
}

}  // namespace detail

/// Re-applies previously computed statistics and cutoff.
inline SkewFilterResult skew_filter(const FeatureMatrix& data, const SkewStats& stats) {
  if (stats.medians.size() != data.cols()) throw ParameterError("skew_filter: width mismatch");
  return detail::keep_within(data, detail::skew_ratios(data.features, stats), stats, false);
}

/// Drops rows with any feature outside median +- 6 MAD (per feature, MAD
/// floored). At most 10% of rows are dropped; past that the cutoff widens to
/// the 10%-drop quantile of the per-row worst ratio.
inline SkewFilterResult skew_filter(const FeatureMatrix& train) {
  if (train.rows() < 10) throw ParameterError("skew_filter: need at least 10 rows");
  SkewStats s;
  s.cutoff = kSkewCutoff;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    const auto col = train.features.column(j);
    s.medians.push_back(median(col));
    s.mads.push_back(mad_about(col, s.medians.back()));
  }
  const auto ratio = detail::skew_ratios(train.features, s);
  const std::size_t cap =
      static_cast<std::size_t>(std::floor(kSkewMaxDropFraction * static_cast<double>(train.rows())));
  const auto over = static_cast<std::size_t>(
      std::count_if(ratio.begin(), ratio.end(), [&](double v) { return v > s.cutoff; }));
  bool widened = false;
  if (over > cap) {
    std::vector<double> sorted = ratio;
    std::sort(sorted.begin(), sorted.end());
    s.cutoff = sorted[train.rows() - cap - 1];
    widened = true;
  }
  return detail::keep_within(train, ratio, std::move(s), widened);
}

// Controlled normal/near/far benchmark.
//
// Normals follow a zero-mean Gaussian with marginal standard deviation sigma
// and AR(1) correlation rho^|i-j|. Near anomalies sit at the centre
// displaced by near_offset * sigma along the minor axis (the least-variance
// eigenvector), breaking the correlation structure while staying close to
// the normal manifold. Far anomalies are normal draws displaced by
// far_offset * sigma * sqrt(d) in a uniformly random direction (RMS
// displacement far_offset * sigma per coordinate).
struct SynthSpec {
  std::size_t n_normal = 2000;
  std::size_t n_near = 250;
  std::size_t n_far = 250;
  std::size_t d = 10;
  double rho = 0.7;
  double sigma = 1.0;
  double near_offset = 1.5;
  double near_jitter = 0.1;
  double far_offset = 8.0;
  std::uint64_t seed = 42;
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec s = {}) {
  s.n_normal = j.value("n_normal", s.n_normal);
  s.n_near = j.value("n_near", s.n_near);
  s.n_far = j.value("n_far", s.n_far);
  s.d = j.value("d", s.d);
  s.rho = j.value("rho", s.rho);
  s.sigma = j.value("sigma", s.sigma);
  s.near_offset = j.value("near_offset", s.near_offset);
  s.near_jitter = j.value("near_jitter", s.near_jitter);
  s.far_offset = j.value("far_offset", s.far_offset);
  s.seed = j.value("seed", s.seed);
  return s;
}

namespace detail {

inline Matrix cholesky_lower(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw ParameterError("synth_generate: correlation is not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Least-variance eigenvector by inverse iteration, sign fixed so the first
// nonzero entry is positive.
inline std::vector<double> minor_axis(const Matrix& cov) {
  const std::size_t n = cov.rows();
  const Matrix inv = ridge_inverse(cov, 0.0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (i % 2 == 0 ? 1.0 : -1.0) + 0.01 * static_cast<double>(i);
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += inv(i, j) * v[j];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      break;
    }
  }
  return v;
}

}  // namespace detail

inline Matrix synth_covariance(const SynthSpec& spec) {
  Matrix cov(spec.d, spec.d);
  for (std::size_t i = 0; i < spec.d; ++i)
    for (std::size_t j = 0; j < spec.d; ++j)
      cov(i, j) = spec.sigma * spec.sigma *
                  std::pow(spec.rho, static_cast<double>(i > j ? i - j : j - i));
  return cov;
}

inline std::vector<double> synth_minor_axis(const SynthSpec& spec) {
  return detail::minor_axis(synth_covariance(spec));
}

/// Rows are ordered normals, then near, then far. Labels are 0/1 and groups
/// are "normal", "near", "far".
inline FeatureMatrix synth_generate(const SynthSpec& spec) {
  if (spec.d < 2) throw ParameterError("synth_generate: need d >= 2 for a correlation structure");
  if (!(spec.sigma > 0.0) || !(spec.near_offset > 0.0) || !(spec.far_offset > 0.0) ||
      spec.near_jitter < 0.0) {
    throw ParameterError("synth_generate: scale and offsets must be positive");
  }
  if (!(std::abs(spec.rho) < 1.0)) throw ParameterError("synth_generate: |rho| must be < 1");
  const std::size_t d = spec.d;
  const Matrix chol = detail::cholesky_lower(synth_covariance(spec));
  const auto axis = synth_minor_axis(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto draw_normal = [&](std::span<double> out) {
    std::vector<double> e(d);
    for (double& v : e) v = gauss(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += chol(i, j) * e[j];
      out[i] = s;
    }
  };

  const std::size_t n = spec.n_normal + spec.n_near + spec.n_far;
  FeatureMatrix out;
  out.features = Matrix(n, d);
  out.labels.emplace();
  out.groups.emplace();
  for (std::size_t j = 0; j < d; ++j) out.feature_names.push_back("f" + std::to_string(j));

  std::size_t r = 0;
  for (std::size_t i = 0; i < spec.n_normal; ++i, ++r) {
    draw_normal(out.features.row(r));
    out.labels->push_back(0);
    out.groups->push_back("normal");
  }
  for (std::size_t i = 0; i < spec.n_near; ++i, ++r) {
    auto row = out.features.row(r);
    for (std::size_t j = 0; j < d; ++j)
      row[j] = spec.sigma * (spec.near_offset * axis[j] + spec.near_jitter * gauss(rng));
    out.labels->push_back(1);
    out.groups->push_back("near");
  }
  const double far_len = spec.far_offset * spec.sigma * std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < spec.n_far; ++i, ++r) {
    auto row = out.features.row(r);
    draw_normal(row);
    std::vector<double> dir(d);
    double norm = 0.0;
    for (double& v : dir) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) row[j] += far_len * dir[j] / norm;
    out.labels->push_back(1);
    out.groups->push_back("far");
  }
  return out;
}

struct Splits {
  FeatureMatrix train;
  FeatureMatrix validation;
  FeatureMatrix test;
};

/// Seeded, disjoint three-way split. Validation takes `validation_fraction`
/// (default: half the remainder), test the rest. With labels present the
/// split is stratified: each class is shuffled separately and the classes
/// are interleaved by relative rank, so every split keeps class proportions
/// within one row.
inline Splits split(const FeatureMatrix& data, double train_fraction, std::uint64_t seed,
                    std::optional<double> validation_fraction = std::nullopt) {
  const double val_fraction = validation_fraction.value_or((1.0 - train_fraction) / 2.0);
  if (!(train_fraction > 0.0 && train_fraction < 1.0) ||
      !(val_fraction > 0.0 && val_fraction < 1.0) || !(train_fraction + val_fraction < 1.0)) {
    throw ParameterError("split: fractions must lie in (0,1) and sum below 1");
  }
  const std::size_t n = data.rows();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order;
  if (data.labels) {
    std::vector<std::vector<std::size_t>> classes(2);
    for (std::size_t i = 0; i < n; ++i) classes[(*data.labels)[i] != 0].push_back(i);
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::shuffle(classes[c].begin(), classes[c].end(), rng);
      const double m = static_cast<double>(classes[c].size());
      for (std::size_t k = 0; k < classes[c].size(); ++k)
        keyed.emplace_back((static_cast<double>(k) + 0.5) / m, classes[c][k]);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& kv : keyed) order.push_back(kv.second);
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DataError("split: " + std::to_string(n) + " rows are too few for three non-empty splits");
  }
  const auto part = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                 order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(idx.begin(), idx.end());
    return data.subset(idx);
  };
  return {part(0, n_train), part(n_train, n_train + n_val), part(n_train + n_val, n)};
}

}  // namespace drmdit
