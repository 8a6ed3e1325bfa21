#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drmdit/data.hpp"
#include "drmdit/error.hpp"
#include "drmdit/metrics.hpp"
#include "drmdit/train.hpp"

namespace drmdit {

// Scores inside [low, high] are normal; below low is a near anomaly and
// above high a far anomaly. Boundary values are normal.
struct ScoreBand {
  double low = 0.01;
  double high = 0.08;
};

inline void validate(const ScoreBand& b) {
  if (!std::isfinite(b.low) || !std::isfinite(b.high) || !(b.low < b.high)) {
    throw ParameterError("score band needs finite low < high");
  }
}

enum class Tag { normal, near, far };

inline std::string to_string(Tag t) {
  switch (t) {
    case Tag::normal: return "normal";
    case Tag::near: return "near";
    case Tag::far: return "far";
  }
  return "unknown";
}

struct Classification {
  std::vector<int> predictions;
  std::vector<Tag> tags;
};

inline Classification classify(std::span<const double> scores, const ScoreBand& band) {
  validate(band);
  Classification c;
  c.predictions.reserve(scores.size());
  c.tags.reserve(scores.size());
  for (double s : scores) {
    const Tag t = s < band.low ? Tag::near : (s > band.high ? Tag::far : Tag::normal);
    c.tags.push_back(t);
    c.predictions.push_back(t == Tag::normal ? 0 : 1);
  }
  return c;
}

struct BandSelection {
  ScoreBand band;
  double f1 = 0.0;
};

/// Exhaustive search over (low, high) cut pairs placed at midpoints between
/// consecutive distinct scores, plus one cut below the minimum and one above
/// the maximum, maximizing anomaly-class F1. Ties go to the band flagging
/// the fewest rows, then the widest band.
inline BandSelection select_band(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ParameterError("select_band: length mismatch");
  std::size_t positives = 0;
  for (int y : labels) positives += y != 0;
  if (positives == 0 || positives == labels.size()) {
    throw ThresholdError("select_band: labels must contain both classes");
  }
  // Distinct sorted values with per-value class counts.
  std::map<double, std::pair<std::size_t, std::size_t>> by_value;  // value -> (pos, neg)
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("select_band: non-finite score");
    auto& cell = by_value[scores[i]];
    (labels[i] != 0 ? cell.first : cell.second) += 1;
  }
  std::vector<double> vals;
  std::vector<std::size_t> pos_prefix{0};
  std::vector<std::size_t> neg_prefix{0};
  for (const auto& [v, cnt] : by_value) {
    vals.push_back(v);
    pos_prefix.push_back(pos_prefix.back() + cnt.first);
    neg_prefix.push_back(neg_prefix.back() + cnt.second);
  }
  const std::size_t m = vals.size();
  const double spread = std::max(vals.back() - vals.front(), 1.0);
  // cut[c] for c in 0..m: c values lie below the cut.
  std::vector<double> cut(m + 1);
  cut[0] = vals.front() - 0.5 * spread;
  cut[m] = vals.back() + 0.5 * spread;
  for (std::size_t c = 1; c < m; ++c) cut[c] = 0.5 * (vals[c - 1] + vals[c]);

  const double total_pos = static_cast<double>(positives);
  BandSelection best;
  double best_f1 = -1.0;
  std::size_t best_flagged = 0;
  double best_width = 0.0;
  for (std::size_t lo = 0; lo < m; ++lo) {
    for (std::size_t hi = lo + 1; hi <= m; ++hi) {
      // Rows below cut[lo] or above cut[hi] are flagged.
      const std::size_t tp = pos_prefix[lo] + (pos_prefix[m] - pos_prefix[hi]);
      const std::size_t fp = neg_prefix[lo] + (neg_prefix[m] - neg_prefix[hi]);
      const double f1 = 2.0 * static_cast<double>(tp) /
                        (static_cast<double>(tp + fp) + total_pos);
      const std::size_t flagged = tp + fp;
      const double width = cut[hi] - cut[lo];
      const bool better = f1 > best_f1 ||
                          (f1 == best_f1 && (flagged < best_flagged ||
                                             (flagged == best_flagged && width > best_width)));
      if (better) {
        best_f1 = f1;
        best_flagged = flagged;
        best_width = width;
        best.band = {cut[lo], cut[hi]};
        best.f1 = f1;
      }
    }
  }
  return best;
}

struct ScoreReport {
  ScoreMode mode = ScoreMode::robust_md;
  std::vector<double> scores;
  std::vector<double> transformed;  // |score - center|
  double center = 0.0;              // median training score for this mode
  ScoreBand band;
  bool band_auto = false;
  std::vector<int> predictions;
  std::vector<Tag> tags;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::string>> groups;
  std::optional<Metrics> metrics;
  std::optional<double> auc;
  std::map<std::string, double> group_recall;  // per non-normal group
};

/// Selects the model's feature columns and applies its training
/// normalization.
inline FeatureMatrix prepare_features(const Model& model, const FeatureMatrix& raw) {
  FeatureMatrix data = raw;
  if (!model.feature_names.empty() && raw.feature_names != model.feature_names) {
    std::vector<std::size_t> idx;
    for (const auto& name : model.feature_names) {
      const auto it = std::find(raw.feature_names.begin(), raw.feature_names.end(), name);
      if (it == raw.feature_names.end()) throw DataError("data lacks model feature '" + name + "'");
      idx.push_back(static_cast<std::size_t>(it - raw.feature_names.begin()));
    }
    data.features = Matrix(raw.rows(), idx.size());
    for (std::size_t r = 0; r < raw.rows(); ++r)
      for (std::size_t j = 0; j < idx.size(); ++j) data.features(r, j) = raw.features(r, idx[j]);
    data.feature_names = model.feature_names;
  }
  if (model.normalization && !raw.normalization) data = apply_minmax(data, *model.normalization);
  return data;
}

inline std::vector<double> score(const Model& model, const FeatureMatrix& data, ScoreMode mode) {
  if (data.cols() != model.params.input_dim()) {
    throw ParameterError("score: data has " + std::to_string(data.cols()) +
                         " features, model expects " + std::to_string(model.params.input_dim()));
  }
  return score_matrix(model, data.features, mode);
}

/// Scores, classifies and (with labels) evaluates a normalized data set. A
/// missing band means select it from the labels.
inline ScoreReport build_report(const Model& model, const FeatureMatrix& data, ScoreMode mode,
                                std::optional<ScoreBand> band) {
  ScoreReport rep;
  rep.mode = mode;
  rep.scores = score(model, data, mode);
  rep.center = model.train_median(mode);
  rep.transformed = fold_scores(rep.scores, rep.center);
  rep.labels = data.labels;
  rep.groups = data.groups;
  if (band) {
    rep.band = *band;
  } else {
    if (!data.labels) throw ParameterError("automatic band selection needs labels");
    rep.band = select_band(rep.scores, *data.labels).band;
    rep.band_auto = true;
  }
  auto cls = classify(rep.scores, rep.band);
  rep.predictions = std::move(cls.predictions);
  rep.tags = std::move(cls.tags);
  if (data.labels && !data.labels->empty()) {
    rep.metrics = metrics(rep.predictions, *data.labels);
    const auto& y = *data.labels;
    const bool both = std::any_of(y.begin(), y.end(), [](int v) { return v != 0; }) &&
                      std::any_of(y.begin(), y.end(), [](int v) { return v == 0; });
    if (both) rep.auc = auc(rep.transformed, y);
  }
  if (data.groups) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> hit;  // group -> (flagged, total)
    for (std::size_t i = 0; i < data.groups->size(); ++i) {
      const auto& g = (*data.groups)[i];
      if (data.labels && (*data.labels)[i] == 0) continue;
      hit[g].first += rep.predictions[i];
      hit[g].second += 1;
    }
    for (const auto& [g, c] : hit)
      rep.group_recall[g] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return rep;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline nlohmann::json report_to_json(const ScoreReport& r) {
  nlohmann::json j;
  j["scoring_mode"] = to_string(r.mode);
  j["band"] = {{"low", r.band.low}, {"high", r.band.high}, {"auto", r.band_auto}};
  j["center"] = r.center;
  j["scores"] = r.scores;
  j["transformed_scores"] = r.transformed;
  j["predictions"] = r.predictions;
  std::vector<std::string> tags;
  for (Tag t : r.tags) tags.push_back(to_string(t));
  j["tags"] = tags;
  std::size_t counts[3] = {0, 0, 0};
  for (Tag t : r.tags) ++counts[static_cast<int>(t)];
  j["tag_counts"] = {{"normal", counts[0]}, {"near", counts[1]}, {"far", counts[2]}};
  if (r.labels) j["labels"] = *r.labels;
  if (r.groups) j["groups"] = *r.groups;
  if (r.metrics) {
    j["metrics"] = {{"accuracy", r.metrics->accuracy},
                    {"precision", r.metrics->precision},
                    {"recall", r.metrics->recall},
                    {"precision_undefined", r.metrics->precision_undefined},
                    {"tp", r.metrics->counts.tp},
                    {"fp", r.metrics->counts.fp},
                    {"tn", r.metrics->counts.tn},
                    {"fn", r.metrics->counts.fn}};
    if (r.auc) j["metrics"]["auc"] = *r.auc;
  }
  if (!r.group_recall.empty()) j["group_recall"] = r.group_recall;
  return j;
}

/// Writes {prefix}.report.json and {prefix}.trace.csv.
inline void emit_report(const ScoreReport& r, const std::filesystem::path& prefix) {
  const std::filesystem::path json_path = prefix.string() + ".report.json";
  const std::filesystem::path csv_path = prefix.string() + ".trace.csv";
  {
    std::ofstream out(json_path);
    if (!out) throw DataError("cannot write " + json_path.string());
    out << report_to_json(r).dump(2) << '\n';
    if (!out) throw DataError("write failed for " + json_path.string());
  }
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write " + csv_path.string());
  out << "index,score,transformed_score" << (r.labels ? ",label" : "") << ",prediction,tag\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    out << i << ',' << detail::format_double(r.scores[i]) << ','
        << detail::format_double(r.transformed[i]);
    if (r.labels) out << ',' << (*r.labels)[i];
    out << ',' << r.predictions[i] << ',' << to_string(r.tags[i]) << '\n';
  }
  if (!out) throw DataError("write failed for " + csv_path.string());
}

}  // namespace drmdit
