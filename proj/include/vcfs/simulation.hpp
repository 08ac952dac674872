#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vcfs/dataset.hpp"
#include "vcfs/error.hpp"
#include "vcfs/regression.hpp"
#include "vcfs/selector.hpp"
#include "vcfs/spline.hpp"

namespace vcfs {

enum class Example { ex1, ex2 };

inline const char* to_string(Example e) { return e == Example::ex1 ? "ex1" : "ex2"; }

/// Generator and selector settings for one synthetic experiment.
struct SimScenario {
  Example example = Example::ex1;
  int n = 400;
  int p = 1000;
  double t1 = 0.0;
  double t2 = 0.0;
  std::uint64_t seed = 20240101;
  int reps = 50;
  double test_fraction = 0.5;
  int dim_L = 7;
  int order = 4;
  EbicConfig ebic;
  Criterion criterion = Criterion::argmin_sigma;
  int screen_k = 0;  // 0 = no marginal pre-ranking

  /// True support, covariate indices starting at 1.
  std::vector<int> support() const {
    std::vector<int> s(example == Example::ex1 ? 4 : 8);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = static_cast<int>(k) + 1;
    return s;
  }
  int test_size() const { return static_cast<int>(std::lround(test_fraction * n)); }

  void validate() const {
    const int p0 = static_cast<int>(support().size());
    if (p < p0) throw InvalidConfiguration("p must cover the true support (p >= " + std::to_string(p0) + ")");
    if (!(t1 >= 0.0) || !(t2 >= 0.0)) throw InvalidConfiguration("t1 and t2 must be nonnegative");
    if (reps < 1) throw InvalidConfiguration("reps must be >= 1");
    if (!(test_fraction > 0.0) || test_size() < 1) throw InvalidConfiguration("test_fraction gives an empty test set");
    if (dim_L < order || order < 2) throw InvalidConfiguration("need L >= order >= 2");
    if (n < 2 * dim_L * (p0 + 1)) {
      throw InvalidConfiguration("n must be at least 2L(|S0|+1) = " + std::to_string(2 * dim_L * (p0 + 1)));
    }
    if (screen_k < 0 || screen_k > p) throw InvalidConfiguration("screen_k must lie in [0, p]");
  }
};

/// Independent random streams keyed by (seed, rep, purpose).
enum class StreamPurpose : std::uint32_t { train = 0, test = 1, snr = 2 };

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t rep, StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32),
                    static_cast<std::uint32_t>(purpose), 0x76636673u};
  return std::mt19937_64(seq);
}

/// beta_j(t) for covariate j of the given example (0 outside the support).
inline double true_coefficient(Example e, int j, double t) {
  const double s = std::sin(2.0 * std::numbers::pi * t);
  if (e == Example::ex1) {
    switch (j) {
      case 1: return 2.0;
      case 2: return 3.0 * t;
      case 3: return (t + 1.0) * (t + 1.0);
      case 4: return 4.0 * s / (2.0 - s);
      default: return 0.0;
    }
  }
  switch (j) {
    case 1: return 3.0 * t;
    case 2: return (t + 1.0) * (t + 1.0);
    case 3: return (t - 2.0) * (t - 2.0) * (t - 2.0);
    case 4: return 3.0 * s;
    case 5: return std::exp(t);
    case 6: return 2.0;
    case 7: return 2.0;
    case 8: return 3.0 * std::sqrt(t);
    default: return 0.0;
  }
}

inline int support_size(Example e) { return e == Example::ex1 ? 4 : 8; }

/// Raw draws for `rows` observations: X_j = (Z_j + t1 U1)/(1 + t1),
/// T = (U2 + t2 U1)/(1 + t2), Y = sum_j beta_j(T) X_j + eps.
///
/// Per row the stream is consumed as U1, U2, eps, Z_1..Z_p. Normals come
/// from std::normal_distribution (libstdc++: Marsaglia polar method).
inline Dataset draw_dataset(Example e, int rows, int p, double t1, double t2, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd y(rows), t(rows);
  Eigen::MatrixXd x(rows, p);
  const int p0 = support_size(e);
  for (int i = 0; i < rows; ++i) {
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    const double eps = normal(rng);
    const double ti = (u2 + t2 * u1) / (1.0 + t2);
    double signal = 0.0;
    for (int j = 0; j < p; ++j) {
      const double z = normal(rng);
      x(i, j) = (z + t1 * u1) / (1.0 + t1);
      if (j < p0) signal += true_coefficient(e, j + 1, ti) * x(i, j);
    }
    t(i) = ti;
    y(i) = signal + eps;
  }
  return make_dataset(std::move(y), std::move(t), x);
}

struct GeneratedRep {
  Dataset train;
  Dataset test;
  std::vector<int> support;
};

inline GeneratedRep generate(const SimScenario& sc, int rep_index) {
  auto train_rng = make_stream(sc.seed, static_cast<std::uint64_t>(rep_index), StreamPurpose::train);
  auto test_rng = make_stream(sc.seed, static_cast<std::uint64_t>(rep_index), StreamPurpose::test);
  return {draw_dataset(sc.example, sc.n, sc.p, sc.t1, sc.t2, train_rng),
          draw_dataset(sc.example, sc.test_size(), sc.p, sc.t1, sc.t2, test_rng), sc.support()};
}

struct TrueCorrelations {
  double xx = 0.0;
  double xt = 0.0;
};

/// corr(X_j, X_k) = t1^2 / (12 + t1^2); corr(X_j, T) = t1 t2 / sqrt((12 + t1^2)(1 + t2^2)).
inline TrueCorrelations true_correlations(double t1, double t2) {
  if (!(t1 >= 0.0) || !(t2 >= 0.0)) throw InvalidConfiguration("t1, t2 must be nonnegative");
  return {t1 * t1 / (12.0 + t1 * t1), t1 * t2 / std::sqrt((12.0 + t1 * t1) * (1.0 + t2 * t2))};
}

/// Monte Carlo Var(sum_j beta_j(T) X_j) / Var(eps), Var(eps) = 1.
/// `coef` overrides the example's coefficient functions when given.
template <class Coef>
double snr_with(const SimScenario& sc, int mc_samples, Coef&& coef) {
  if (mc_samples < 10000) throw InvalidConfiguration("snr needs at least 10^4 Monte Carlo samples");
  auto rng = make_stream(sc.seed, 0, StreamPurpose::snr);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int p0 = support_size(sc.example);
  double mean = 0.0;
  double m2 = 0.0;
  for (int s = 0; s < mc_samples; ++s) {
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    const double t = (u2 + sc.t2 * u1) / (1.0 + sc.t2);
    double signal = 0.0;
    for (int j = 1; j <= p0; ++j) {
      const double xj = (normal(rng) + sc.t1 * u1) / (1.0 + sc.t1);
      signal += coef(j, t) * xj;
    }
    const double d = signal - mean;
    mean += d / (s + 1);
    m2 += d * (signal - mean);
  }
  return m2 / (mc_samples - 1);
}

inline double snr(const SimScenario& sc, int mc_samples = 200000) {
  return snr_with(sc, mc_samples, [&](int j, double t) { return true_coefficient(sc.example, j, t); });
}

struct RepMetrics {
  int tp = 0;
  int fp = 0;
  double pe = 0.0;
  int model_size = 0;
};

/// Mean squared prediction error of `fit` on `test`.
inline double prediction_error(const FitResult& fit, const SplineBasis& basis, const Dataset& test) {
  if (fit.index_set.empty()) return test.y.squaredNorm() / static_cast<double>(test.n());
  const Eigen::MatrixXd b = basis.basis_matrix(test.t);
  Eigen::VectorXd yhat = Eigen::VectorXd::Zero(test.n());
  for (std::size_t k = 0; k < fit.index_set.size(); ++k) {
    const Eigen::VectorXd beta = b * fit.gamma.segment(static_cast<Eigen::Index>(k) * basis.dim(), basis.dim());
    yhat.array() += beta.array() * test.x.col(fit.index_set[k]).array();
  }
  return (test.y - yhat).squaredNorm() / static_cast<double>(test.n());
}

inline RepMetrics evaluate_rep(const std::vector<int>& selected, const std::vector<int>& support,
                               const FitResult& fit, const SplineBasis& basis, const Dataset& test) {
  RepMetrics m;
  for (int j : selected) {
    if (j == 0) continue;
    if (std::find(support.begin(), support.end(), j) != support.end()) {
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  m.model_size = static_cast<int>(selected.size());
  m.pe = prediction_error(fit, basis, test);
  return m;
}

/// Fits the given covariate set on `data`.
inline FitResult fit_set(const Dataset& data, const SplineBasis& basis, const std::vector<int>& set) {
  const Eigen::MatrixXd rows = basis.basis_matrix(data.t);
  std::vector<DesignBlock> blocks;
  for (int j : set) blocks.push_back(design_block_from(rows, data.x.col(j), j));
  FitResult fit = fit_full(blocks, data.y);
  fit.dim_L = basis.dim();
  return fit;
}

/// Quantile with linear interpolation between order statistics (R type 7).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidConfiguration("quantile of an empty list");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// IQR / 1.349, the normal-consistent robust standard deviation.
inline double robust_sd(const std::vector<double>& v) {
  return (quantile(v, 0.75) - quantile(v, 0.25)) / 1.349;
}

struct AggregateMetrics {
  int reps = 0;
  double mean_tp = 0.0;
  double mean_fp = 0.0;
  double mean_pe = 0.0;
  double mean_size = 0.0;
  double rsd_tp = 0.0;
  double rsd_fp = 0.0;
  double rsd_pe = 0.0;
  double rsd_size = 0.0;
  double snr_estimate = 0.0;
};

inline AggregateMetrics aggregate(const std::vector<RepMetrics>& reps, double snr_estimate = 0.0) {
  if (reps.empty()) throw InvalidConfiguration("aggregate needs at least one repetition");
  std::vector<double> tp, fp, pe, size;
  for (const auto& r : reps) {
    tp.push_back(r.tp);
    fp.push_back(r.fp);
    pe.push_back(r.pe);
    size.push_back(r.model_size);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  AggregateMetrics a;
  a.reps = static_cast<int>(reps.size());
  a.mean_tp = mean(tp);
  a.mean_fp = mean(fp);
  a.mean_pe = mean(pe);
  a.mean_size = mean(size);
  a.rsd_tp = robust_sd(tp);
  a.rsd_fp = robust_sd(fp);
  a.rsd_pe = robust_sd(pe);
  a.rsd_size = robust_sd(size);
  a.snr_estimate = snr_estimate;
  return a;
}

struct RepResult {
  int rep = 0;
  RepMetrics metrics;
  std::vector<int> selected;
  StopReason stop_reason = StopReason::candidates_exhausted;
};

/// One full repetition: generate, optionally screen, select from {0}, refit, score.
inline RepResult run_rep(const SimScenario& sc, int rep_index, int workers = 1) {
  const GeneratedRep data = generate(sc, rep_index);
  const SplineBasis basis = build_basis(sc.dim_L, sc.order);
  ForwardOptions opts;
  opts.criterion = sc.criterion;
  opts.workers = workers;
  if (sc.screen_k > 0) opts.candidate_pool = marginal_rank_screen(data.train, basis, sc.screen_k, workers);
  const SelectionTrace trace = run_forward(data.train, basis, sc.ebic, {0}, opts);
  const FitResult fit = fit_set(data.train, basis, trace.final_set);
  RepResult out;
  out.rep = rep_index;
  out.selected = trace.final_set;
  out.stop_reason = trace.stop_reason;
  out.metrics = evaluate_rep(trace.final_set, data.support, fit, basis, data.test);
  return out;
}

/// All repetitions of a scenario, results in rep order. Repetitions are
/// spread over `workers` threads; each owns its streams, so output does not
/// depend on the worker count.
inline std::vector<RepResult> run_scenario(const SimScenario& sc, int workers = 1) {
  sc.validate();
  std::vector<RepResult> out(static_cast<std::size_t>(sc.reps));
  detail::parallel_for(out.size(), workers,
                       [&](std::size_t r) { out[r] = run_rep(sc, static_cast<int>(r)); });
  return out;
}

}  // namespace vcfs
