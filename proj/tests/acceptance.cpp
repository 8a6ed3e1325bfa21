// Acceptance runner: one PASS/FAIL/SKIP line per criterion.

#include <sys/wait.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drmdit/drmdit.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace drmdit;
using drmdit::testing::random_matrix;

namespace {

enum class Outcome { pass, fail, skip };

struct Result {
  Outcome outcome = Outcome::fail;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double eigen_entropy(const Matrix& m) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  Eigen::MatrixXd e(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) e(i, j) = m(i, j);
  const Eigen::VectorXd lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues();
  return -std::log2(lambda.squaredNorm());
}

NormalizedGram scaled_identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0 / static_cast<double>(n);
  return NormalizedGram{m};
}

Result gradients() {
  using drmdit::testing::Component;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::size_t nets = 0, max_params = 0;
  for (int n = 0; n < 24; ++n) {
    const NetworkParams p = drmdit::testing::random_small_net(rng, 500 + n);
    const Matrix batch = random_matrix(8, p.input_dim(), rng);
    TrainConfig cfg;
    cfg.sigma = 0.8;
    for (Component c : {Component::md, Component::recon, Component::mi, Component::total}) {
      const auto r = drmdit::testing::check_gradient(p, batch, cfg, c);
      worst = std::max(worst, r.max_rel_error);
      max_params = std::max(max_params, r.params);
    }
    ++nets;
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-4 && nets >= 20 && max_params <= 50 && secs < 30.0;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("nets=%zu max_params=%zu max_rel_err=%.3g time=%.1fs", nets, max_params, worst, secs)};
}

Result entropy() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double worst_oracle = 0.0;
  std::size_t bound_violations = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rng() % 64;
    const auto g = normalized_gaussian_gram(random_matrix(n, 1 + rng() % 4, rng), 0.1 + 0.02 * (rng() % 100));
    const double h = renyi2_matrix(g).value;
    worst_oracle = std::max(worst_oracle, std::abs(h - eigen_entropy(g.mat)));
    if (h < 0.0 || h > std::log2(static_cast<double>(n))) ++bound_violations;
  }
  double worst_identical = 0.0;
  for (std::size_t n = 1; n <= 64; ++n) {
    const Matrix same(n, 3, 0.37);
    worst_identical = std::max(worst_identical, std::abs(renyi2_matrix(normalized_gaussian_gram(same, 0.2)).value));
  }
  std::size_t exact = 0, checked = 0;
  double worst_identity = 0.0;
  for (std::size_t n = 1; n <= 64; ++n) {
    const double h = renyi2_matrix(scaled_identity(n)).value;
    const double want = std::log2(static_cast<double>(n));
    worst_identity = std::max(worst_identity, std::abs(h - want));
    if ((n & (n - 1)) == 0) {
      ++checked;
      if (h == want) ++exact;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_oracle <= 1e-9 && bound_violations == 0 && worst_identical <= 1e-10 &&
                  exact == checked && worst_identity <= 1e-14 && secs < 30.0;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("oracle_err=%.3g bound_violations=%zu identical_H=%.3g identity_exact=%zu/%zu "
              "identity_err(all N)=%.3g time=%.1fs",
              worst_oracle, bound_violations, worst_identical, exact, checked, worst_identity, secs)};
}

Result cs_divergence() {
  std::mt19937_64 rng(303);
  double worst_sym = 0.0, worst_self = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + rng() % 3;
    const Matrix x = random_matrix(1 + rng() % 20, d, rng);
    const Matrix z = random_matrix(1 + rng() % 20, d, rng, 2.0);
    const double s = 0.3 + 0.1 * (rng() % 10);
    worst_sym = std::max(worst_sym, std::abs(cs_divergence_sample(x, z, s) - cs_divergence_sample(z, x, s)));
    worst_self = std::max(worst_self, std::abs(cs_divergence_sample(x, x, s)));
  }
  const double hand = cs_divergence_sample(Matrix{{0.0}}, Matrix{{2.0}}, 1.0);
  const bool ok = worst_sym <= 1e-12 && worst_self <= 1e-10 && std::abs(hand - 1.0) <= 1e-12;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("sets=200 max_asym=%.3g max_self=%.3g hand=%.15g", worst_sym, worst_self, hand)};
}

Result contamination() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g;
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const auto sd = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  int passed = 0;
  double worst_median = 0.0, worst_mad = 0.0, min_mean = 1e300, min_sd = 1e300;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> clean(1000);
    for (double& v : clean) v = g(rng);
    std::vector<std::size_t> idx(clean.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> dirty = clean;
    for (std::size_t i = 0; i < 100; ++i) dirty[idx[i]] = 100.0;
    const double dm = std::abs(median(dirty) - median(clean));
    const double dmad = std::abs(mad(dirty) / mad(clean) - 1.0);
    const double dmean = std::abs(mean(dirty) - mean(clean));
    const double dsd = sd(dirty) / sd(clean) - 1.0;
    worst_median = std::max(worst_median, dm);
    worst_mad = std::max(worst_mad, dmad);
    min_mean = std::min(min_mean, dmean);
    min_sd = std::min(min_sd, dsd);
    if (dm < 0.1 && dmad < 0.15 && dmean > 1.0 && dsd > 5.0) ++passed;
  }
  return {passed == 50 ? Outcome::pass : Outcome::fail,
          fmt("reps_passed=%d/50 max_median_shift=%.4f max_mad_change=%.4f min_mean_shift=%.3g "
              "min_sd_growth=%.0f%%",
              passed, worst_median, worst_mad, min_mean, 100.0 * min_sd)};
}

struct SynthRun {
  FeatureMatrix train;
  FeatureMatrix test;
};

// First 1500 normals train; remaining normals plus all anomalies test.
SynthRun synth_benchmark(std::uint64_t seed) {
  SynthSpec spec;
  spec.d = 10;
  spec.rho = 0.7;
  spec.seed = seed;
  const FeatureMatrix all = synth_generate(spec);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < all.rows(); ++i) {
    const bool normal = (*all.labels)[i] == 0;
    (normal && tr.size() < 1500 ? tr : te).push_back(i);
  }
  SynthRun r{all.subset(tr), all.subset(te)};
  const MinMaxRecord rec = fit_minmax(r.train);
  r.train = skew_filter(apply_minmax(r.train, rec)).kept;
  r.test = apply_minmax(r.test, rec);
  return r;
}

TrainConfig benchmark_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.layer_dims = {10, 6, 3};
  cfg.sigma = 0.1;
  cfg.epochs = 400;
  cfg.seed = seed;
  return cfg;
}

Result separation() {
  const auto t0 = Clock::now();
  const SynthRun run = synth_benchmark(13);
  const Model model = fit(run.train, benchmark_config(13));
  const ScoreReport rob = build_report(model, run.test, ScoreMode::robust_md, std::nullopt);
  const ScoreReport rec = build_report(model, run.test, ScoreMode::euclidean_recon, std::nullopt);
  const double secs = seconds_since(t0);
  const auto recall = [](const ScoreReport& r, const char* g) {
    const auto it = r.group_recall.find(g);
    return it == r.group_recall.end() ? 0.0 : it->second;
  };
  const double rn = recall(rob, "near"), rf = recall(rob, "far");
  const double en = recall(rec, "near"), ef = recall(rec, "far");
  const bool robust_ok = rn >= 0.9 && rf >= 0.9;
  const bool recon_ok = en <= 0.7;
  const bool gap_ok = rn >= en + 0.2;
  const bool ok = robust_ok && recon_ok && gap_ok && secs < 300.0;
  return {ok ? Outcome::pass : Outcome::fail,
          fmt("robust_md near=%.3f far=%.3f band=[%.4g,%.4g] [%s]; euclidean_recon near=%.3f far=%.3f "
              "[%s: near<=0.7]; gap=%.3f [%s: >=0.2]; time=%.1fs",
              rn, rf, rob.band.low, rob.band.high, robust_ok ? "ok" : "miss", en, ef,
              recon_ok ? "ok" : "miss", rn - en, gap_ok ? "ok" : "miss", secs)};
}

struct NslOutcome {
  Result auc;
  Result band;
};

NslOutcome nsl_kdd() {
  const char* path = std::getenv("DRMDIT_NSL_KDD_CSV");
  if (!path || !fs::exists(path)) {
    const Result skip{Outcome::skip, "set DRMDIT_NSL_KDD_CSV to a headed NSL-KDD CSV to run"};
    return {skip, {Outcome::skip, "depends on criterion 6"}};
  }
  const auto t0 = Clock::now();
  FeatureConfig fc;
  const char* label = std::getenv("DRMDIT_NSL_KDD_LABEL");
  fc.label_column = label ? label : "label";
  const FeatureMatrix all = load_csv(path, fc).data;
  std::vector<std::size_t> normals, attacks;
  for (std::size_t i = 0; i < all.rows(); ++i) ((*all.labels)[i] == 0 ? normals : attacks).push_back(i);
  std::mt19937_64 rng(6);
  std::shuffle(normals.begin(), normals.end(), rng);
  std::shuffle(attacks.begin(), attacks.end(), rng);
  if (normals.size() < 11000 || attacks.size() < 1000) {
    const Result fail{Outcome::fail, fmt("need 11000 normal and 1000 attack rows, have %zu and %zu",
                                         normals.size(), attacks.size())};
    return {fail, {Outcome::skip, "depends on criterion 6"}};
  }
  const std::vector<std::size_t> tr(normals.begin(), normals.begin() + 10000);
  std::vector<std::size_t> te(normals.begin() + 10000, normals.begin() + 11000);
  te.insert(te.end(), attacks.begin(), attacks.begin() + 1000);
  FeatureMatrix train = all.subset(tr);
  const MinMaxRecord rec = fit_minmax(train);
  train = skew_filter(apply_minmax(train, rec)).kept;
  const FeatureMatrix test = apply_minmax(all.subset(te), rec);
  TrainConfig cfg;
  cfg.seed = 42;
  const Model model = fit(train, cfg);
  const ScoreReport rep = build_report(model, test, ScoreMode::robust_md, std::nullopt);
  const double secs = seconds_since(t0);
  const double a = rep.auc.value_or(0.0);
  const double med = model.train_median(ScoreMode::robust_md);
  return {{a >= 0.90 && secs < 600.0 ? Outcome::pass : Outcome::fail,
           fmt("features=%zu train=%zu test=2000 auc=%.4f time=%.1fs", all.cols(), train.rows(), a, secs)},
          {med >= 0.001 && med <= 0.8 ? Outcome::pass : Outcome::fail,
           fmt("median training robust score=%.4g", med)}};
}

Result ood_reconstruction() {
  const auto t0 = Clock::now();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthRun run = synth_benchmark(seed);
    std::vector<std::size_t> normal;
    for (std::size_t i = 0; i < run.test.rows(); ++i)
      if ((*run.test.labels)[i] == 0) normal.push_back(i);
    FeatureMatrix shifted = run.test.subset(normal);
    for (std::size_t j = 0; j < shifted.cols(); ++j) {
      std::vector<double> col(run.train.rows());
      for (std::size_t i = 0; i < col.size(); ++i) col[i] = run.train.features(i, j);
      const double m = mad(col);
      for (std::size_t i = 0; i < shifted.rows(); ++i) shifted.features(i, j) += 2.0 * m;
    }
    const auto mse = [&](const LossWeights& w) {
      TrainConfig cfg = benchmark_config(seed);
      cfg.weights = w;
      const Model model = fit(run.train, cfg);
      const auto s = score_matrix(model, shifted.features, ScoreMode::euclidean_recon);
      return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    };
    const double joint = mse(LossWeights{});
    const double plain = mse(LossWeights{0.0, 1.0, 0.0});
    if (joint <= plain) ++wins;
    detail += fmt("seed%llu joint=%.4g recon_only=%.4g; ", static_cast<unsigned long long>(seed), joint, plain);
  }
  detail += fmt("wins=%d/3 time=%.1fs", wins, seconds_since(t0));
  return {wins == 3 ? Outcome::pass : Outcome::fail, detail};
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {Outcome::skip, "no --cli given"};
  fs::create_directories(work);
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  const std::string sink = " >/dev/null 2>&1";
  const fs::path data = work / "synth.csv", cfg = work / "cfg.json";
  std::ofstream(cfg) << R"({"epochs": 20, "layer_dims": [10, 6, 3]})";
  if (run_command(cli + " synth --seed 13 --out " + q(data) + sink) != 0) return {Outcome::fail, "synth failed"};
  for (const char* m : {"m1.json", "m2.json"})
    if (run_command(cli + " train --data " + q(data) + " --labels label --config " + q(cfg) + " --out " +
                    q(work / m) + sink) != 0)
      return {Outcome::fail, "train failed"};
  for (const char* s : {"s1", "s2"})
    if (run_command(cli + " score --model " + q(work / "m1.json") + " --data " + q(data) + " --out " +
                    q(work / s) + sink) != 0)
      return {Outcome::fail, "score failed"};
  const std::string m1 = slurp(work / "m1.json");
  const bool train_same = !m1.empty() && m1 == slurp(work / "m2.json");
  const bool score_same = slurp(work / "s1.report.json") == slurp(work / "s2.report.json") &&
                          slurp(work / "s1.trace.csv") == slurp(work / "s2.trace.csv");
  return {train_same && score_same ? Outcome::pass : Outcome::fail,
          fmt("checkpoints %s (%zu bytes); score outputs %s", train_same ? "identical" : "differ", m1.size(),
              score_same ? "identical" : "differ")};
}

const char* label(Outcome o) {
  switch (o) {
    case Outcome::pass: return "PASS";
    case Outcome::fail: return "FAIL";
    case Outcome::skip: return "SKIP";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "drmdit_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--cli") cli = argv[i + 1];
    else if (key == "--workdir") work = argv[i + 1];
  }

  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Result()>& f) {
    Result r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    if (r.outcome == Outcome::fail) ++failures;
    std::cout << label(r.outcome) << " " << id << " " << name << ": " << r.detail << std::endl;
  };

  report(1, "gradient suite", gradients);
  report(2, "entropy identities", entropy);
  report(3, "cs divergence", cs_divergence);
  report(4, "contamination", contamination);
  report(5, "near/far separation", separation);
  NslOutcome nsl;
  report(6, "nsl-kdd auc", [&] {
    nsl = nsl_kdd();
    return nsl.auc;
  });
  report(7, "score band sanity", [&] { return nsl.band; });
  report(8, "ood reconstruction", ood_reconstruction);
  report(9, "determinism", [&] { return determinism(cli, work); });
  std::cout << failures << " criteria failed" << std::endl;
  return failures == 0 ? 0 : 1;
}
