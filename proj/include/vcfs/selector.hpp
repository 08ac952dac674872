#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vcfs/dataset.hpp"
#include "vcfs/error.hpp"
#include "vcfs/regression.hpp"
#include "vcfs/spline.hpp"

namespace vcfs {

enum class Criterion { argmin_sigma, argmax_corr };
enum class EtaRule { explicit_value, automatic };
enum class StopReason { patience_exhausted, max_steps, candidates_exhausted, exact_fit };

inline const char* to_string(Criterion c) {
  return c == Criterion::argmin_sigma ? "argmin-sigma" : "argmax-corr";
}
inline const char* to_string(EtaRule r) { return r == EtaRule::automatic ? "auto" : "explicit"; }
inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::patience_exhausted: return "patience_exhausted";
    case StopReason::max_steps: return "max_steps";
    case StopReason::candidates_exhausted: return "candidates_exhausted";
    case StopReason::exact_fit: return "exact_fit";
  }
  return "unknown";
}

/// n log(sigma^2) + |Q| L (log n + 2 eta log p). eta = 0 gives the BIC.
inline double ebic(double sigma_sq, int set_size, double n, double p, int dim_L, double eta) {
  if (!(sigma_sq > 0.0)) {
    throw NumericalUnderflow("EBIC undefined for sigma^2 = " + std::to_string(sigma_sq) + " (exact fit)");
  }
  if (set_size < 0) throw InvalidConfiguration("negative set size");
  return n * std::log(sigma_sq) +
         static_cast<double>(set_size) * dim_L * (std::log(n) + 2.0 * eta * std::log(p));
}

inline double bic(double sigma_sq, int set_size, double n, int dim_L) {
  return n * std::log(sigma_sq) + static_cast<double>(set_size) * dim_L * std::log(n);
}

struct EbicConfig {
  double eta = 0.0;
  EtaRule eta_rule = EtaRule::explicit_value;
  int patience = 5;
  std::optional<int> max_steps;  // default floor(n / 2L) - |S1|
};

/// 1 - log n / (3 log p), clamped to [0, 1].
inline double auto_eta(double n, double p, std::vector<std::string>* warnings = nullptr) {
  if (!(p > 1.0)) throw InvalidConfiguration("automatic eta needs p > 1");
  const double raw = 1.0 - std::log(n) / (3.0 * std::log(p));
  const double eta = std::clamp(raw, 0.0, 1.0);
  if (eta != raw && warnings) {
    warnings->push_back("automatic eta " + std::to_string(raw) + " clamped to " + std::to_string(eta));
  }
  return eta;
}

inline double resolve_eta(const EbicConfig& cfg, double n, double p,
                          std::vector<std::string>* warnings = nullptr) {
  if (cfg.eta_rule == EtaRule::automatic) return auto_eta(n, p, warnings);
  if (!(cfg.eta >= 0.0)) throw InvalidConfiguration("eta must be >= 0");
  return cfg.eta;
}

struct SelectedCandidate {
  int index = -1;
  double delta = 0.0;
  double corr_norm = 0.0;
  Eigen::VectorXd gamma;
};

namespace detail {

// Runs body(k) for k in [0, count) on up to `workers` threads. Each k is
// handled by exactly one thread, so results depend only on k.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || count < 2) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::thread> threads;
  const std::size_t nthreads = std::min(w, count);
  threads.reserve(nthreads);
  for (std::size_t tid = 0; tid < nthreads; ++tid) {
    threads.emplace_back([&, tid] {
      for (std::size_t k = tid; k < count; k += nthreads) body(k);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace detail

/// Forward-selection working state: the projection cache for S plus every
/// pool candidate's block residualized against span(W_S).
///
/// Residualized blocks are kept up to date incrementally: accepting l* only
/// projects each remaining block off the L new orthonormal columns.
class CandidateSweep {
 public:
  CandidateSweep(const Dataset& data, const SplineBasis& basis, const std::vector<int>& initial_set,
                 std::vector<int> pool, int workers = 1)
      : data_(&data),
        dim_L_(basis.dim()),
        basis_rows_(basis.basis_matrix(data.t)),
        cache_(data.y),
        pool_(std::move(pool)),
        workers_(workers) {
    std::vector<DesignBlock> blocks;
    for (int j : initial_set) blocks.push_back(block(j));
    cache_ = ProjectionCache::build(blocks, data.y);

    std::sort(pool_.begin(), pool_.end());
    pool_.erase(std::unique(pool_.begin(), pool_.end()), pool_.end());
    pool_.erase(std::remove_if(pool_.begin(), pool_.end(), [&](int j) { return cache_.contains(j); }),
                pool_.end());
    for (int j : pool_) {
      if (j < 0 || j > data.p()) throw InvalidConfiguration("candidate index out of range");
    }
    active_.assign(pool_.size(), 1);
    scale_.resize(pool_.size());
    const Eigen::Index n = data.n();
    resid_.resize(n, dim_L_ * static_cast<Eigen::Index>(pool_.size()));
    detail::parallel_for(pool_.size(), workers_, [&](std::size_t k) {
      const DesignBlock b = block(pool_[k]);
      scale_[k] = max_column_norm(b.matrix);
      resid_.middleCols(static_cast<Eigen::Index>(k) * dim_L_, dim_L_) = cache_.residualize(b.matrix);
    });
  }

  const ProjectionCache& cache() const noexcept { return cache_; }
  const std::vector<int>& pool() const noexcept { return pool_; }
  int dim_L() const noexcept { return dim_L_; }

  DesignBlock block(int j) const {
    return design_block_from(basis_rows_, data_->x.col(j), j);
  }

  /// Scores for every pool member (nullopt: already selected or degenerate).
  std::vector<std::optional<CandidateScore>> score_all() const {
    std::vector<std::optional<CandidateScore>> out(pool_.size());
    detail::parallel_for(pool_.size(), workers_, [&](std::size_t k) {
      if (!active_[k]) return;
      out[k] = score_residualized(resid_.middleCols(static_cast<Eigen::Index>(k) * dim_L_, dim_L_),
                                  cache_.residual_y(), scale_[k]);
    });
    return out;
  }

  /// Best remaining candidate under `criterion`; smallest index wins ties.
  SelectedCandidate select(Criterion criterion) const {
    const auto scores = score_all();
    std::optional<std::size_t> best;
    auto key = [&](std::size_t k) {
      return criterion == Criterion::argmin_sigma ? scores[k]->delta : scores[k]->corr_norm;
    };
    // pool_ is sorted, so a strict comparison keeps the smallest index on ties
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (!scores[k]) continue;
      if (!best || key(k) > key(*best)) best = k;
    }
    if (!best) throw NoCandidate("no non-degenerate candidate remains");
    SelectedCandidate sel;
    sel.index = pool_[*best];
    sel.delta = scores[*best]->delta;
    sel.corr_norm = scores[*best]->corr_norm;
    sel.gamma = scores[*best]->gamma;
    return sel;
  }

  void accept(int j) {
    auto it = std::lower_bound(pool_.begin(), pool_.end(), j);
    if (it == pool_.end() || *it != j) throw InvalidConfiguration("covariate not in candidate pool");
    const auto pos = static_cast<std::size_t>(it - pool_.begin());
    if (!active_[pos]) throw InvalidConfiguration("covariate already accepted");
    const Eigen::MatrixXd q = cache_.extend(block(j));
    active_[pos] = 0;
    detail::parallel_for(pool_.size(), workers_, [&](std::size_t k) {
      if (!active_[k]) return;
      auto cols = resid_.middleCols(static_cast<Eigen::Index>(k) * dim_L_, dim_L_);
      const Eigen::MatrixXd coef = q.transpose() * cols;
      cols.noalias() -= q * coef;
    });
  }

 private:
  const Dataset* data_;
  Eigen::Index dim_L_;
  Eigen::MatrixXd basis_rows_;
  ProjectionCache cache_;
  std::vector<int> pool_;
  std::vector<char> active_;
  std::vector<double> scale_;
  Eigen::MatrixXd resid_;
  int workers_;
};

/// Every covariate not in `initial_set` and not flagged constant. The
/// intercept is a candidate only when it is not already in the initial set.
inline std::vector<int> default_pool(const Dataset& data, const std::vector<int>& initial_set) {
  std::vector<int> pool;
  for (int j = 0; j <= data.p(); ++j) {
    if (std::find(initial_set.begin(), initial_set.end(), j) != initial_set.end()) continue;
    if (data.is_excluded(j)) continue;
    pool.push_back(j);
  }
  return pool;
}

inline SelectedCandidate select_candidate(const CandidateSweep& sweep, Criterion criterion) {
  return sweep.select(criterion);
}

struct SelectionStep {
  int chosen_index = -1;
  double sigma_sq_after = 0.0;
  double ebic_after = 0.0;
  double delta_rss = 0.0;
};

struct SelectionTrace {
  std::vector<int> initial_set;
  double initial_sigma_sq = 0.0;
  double initial_ebic = 0.0;
  std::vector<SelectionStep> steps;
  std::size_t kept_steps = 0;  // prefix length of `steps` retained in final_set
  std::vector<int> final_set;
  StopReason stop_reason = StopReason::candidates_exhausted;
  double eta = 0.0;
  int max_steps = 0;
  std::vector<std::string> warnings;

  /// Sets along the path: S1, S1+l1, ...
  std::vector<int> prefix_set(std::size_t k) const {
    std::vector<int> s = initial_set;
    for (std::size_t i = 0; i < k; ++i) s.push_back(steps[i].chosen_index);
    return s;
  }
  std::vector<double> sigma_sq_path() const {
    std::vector<double> out{initial_sigma_sq};
    for (const auto& s : steps) out.push_back(s.sigma_sq_after);
    return out;
  }
  std::vector<double> ebic_path() const {
    std::vector<double> out{initial_ebic};
    for (const auto& s : steps) out.push_back(s.ebic_after);
    return out;
  }
};

struct ForwardOptions {
  Criterion criterion = Criterion::argmin_sigma;
  std::optional<std::vector<int>> candidate_pool;
  int workers = 1;
};

inline int default_max_steps(Eigen::Index n, int dim_L, std::size_t initial_size) {
  const auto cap = static_cast<long>(n / (2 * dim_L)) - static_cast<long>(initial_size);
  return static_cast<int>(std::max(0L, cap));
}

// sigma^2 at or below this fraction of y'y/n counts as an exact fit.
inline constexpr double kExactFitFraction = 1e-20;

/// Greedy forward selection with EBIC stopping.
///
/// Candidates are accepted provisionally until the EBIC has risen for
/// `patience` consecutive steps; the declared set is the prefix with the
/// smallest EBIC seen.
inline SelectionTrace run_forward(const Dataset& data, const SplineBasis& basis, const EbicConfig& config,
                                  const std::vector<int>& initial_set, const ForwardOptions& options = {}) {
  if (config.patience < 1) throw InvalidConfiguration("patience must be >= 1");
  for (int j : initial_set) {
    if (j < 0 || j > data.p()) {
      throw InvalidConfiguration("initial set index " + std::to_string(j) + " out of range");
    }
  }
  const double n = static_cast<double>(data.n());
  const double p = static_cast<double>(data.p());
  const int L = basis.dim();

  SelectionTrace trace;
  trace.initial_set = initial_set;
  trace.eta = resolve_eta(config, n, p, &trace.warnings);
  trace.max_steps = config.max_steps.value_or(default_max_steps(data.n(), L, initial_set.size()));
  if (trace.max_steps < 0 || static_cast<double>(trace.max_steps) * L > n) {
    throw InvalidConfiguration("max_steps * L must not exceed n");
  }

  CandidateSweep sweep(data, basis, initial_set,
                       options.candidate_pool.value_or(default_pool(data, initial_set)), options.workers);
  const double exact_fit = kExactFitFraction * data.y.squaredNorm() / n;
  const auto set_ebic = [&](double sigma_sq, std::size_t size) {
    return ebic(sigma_sq, static_cast<int>(size), n, p, L, trace.eta);
  };

  trace.initial_sigma_sq = sweep.cache().sigma_sq();
  if (trace.initial_sigma_sq <= exact_fit) {
    trace.initial_ebic = -std::numeric_limits<double>::infinity();
    trace.stop_reason = StopReason::exact_fit;
    trace.final_set = initial_set;
    return trace;
  }
  trace.initial_ebic = set_ebic(trace.initial_sigma_sq, initial_set.size());

  double best = trace.initial_ebic;
  double previous = trace.initial_ebic;
  int rises = 0;
  std::size_t set_size = initial_set.size();
  for (;;) {
    if (static_cast<int>(trace.steps.size()) >= trace.max_steps ||
        static_cast<Eigen::Index>(L) * static_cast<Eigen::Index>(set_size + 1) > data.n()) {
      trace.stop_reason = StopReason::max_steps;
      break;
    }
    SelectedCandidate sel;
    try {
      sel = sweep.select(options.criterion);
    } catch (const NoCandidate&) {
      trace.stop_reason = StopReason::candidates_exhausted;
      break;
    }
    sweep.accept(sel.index);
    ++set_size;
    SelectionStep step;
    step.chosen_index = sel.index;
    step.delta_rss = sel.delta;
    step.sigma_sq_after = sweep.cache().sigma_sq();
    if (step.sigma_sq_after <= exact_fit) {
      step.ebic_after = -std::numeric_limits<double>::infinity();
      trace.steps.push_back(step);
      trace.kept_steps = trace.steps.size();
      trace.stop_reason = StopReason::exact_fit;
      trace.warnings.push_back("exact fit reached after adding covariate " + std::to_string(sel.index));
      break;
    }
    step.ebic_after = set_ebic(step.sigma_sq_after, set_size);
    trace.steps.push_back(step);
    if (step.ebic_after < best) {
      best = step.ebic_after;
      trace.kept_steps = trace.steps.size();
    }
    rises = step.ebic_after > previous ? rises + 1 : 0;
    previous = step.ebic_after;
    if (rises >= config.patience) {
      trace.stop_reason = StopReason::patience_exhausted;
      break;
    }
  }
  trace.final_set = trace.prefix_set(trace.kept_steps);
  return trace;
}

/// Ranks covariates by the BIC of their marginal model {0, j} and returns
/// the best `keep_k` indices (ascending BIC, smaller index first on ties).
inline std::vector<int> marginal_rank_screen(const Dataset& data, const SplineBasis& basis, int keep_k,
                                             int workers = 1) {
  if (keep_k < 1 || keep_k > data.p()) {
    throw InvalidConfiguration("keep_k must lie in [1, p]; got " + std::to_string(keep_k));
  }
  std::vector<int> pool;
  for (int j = 1; j <= data.p(); ++j) {
    if (!data.is_excluded(j)) pool.push_back(j);
  }
  CandidateSweep sweep(data, basis, {0}, pool, workers);
  const auto scores = sweep.score_all();
  const double n = static_cast<double>(data.n());
  struct Ranked {
    double bic;
    int index;
  };
  std::vector<Ranked> ranked;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!scores[k]) continue;
    const double sigma = std::max(sweep.cache().sigma_sq() - scores[k]->delta, 0.0);
    const double value = sigma > 0.0 ? bic(sigma, 2, n, basis.dim())
                                     : -std::numeric_limits<double>::infinity();
    ranked.push_back({value, sweep.pool()[k]});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return a.bic < b.bic || (a.bic == b.bic && a.index < b.index);
  });
  std::vector<int> out;
  for (std::size_t k = 0; k < ranked.size() && static_cast<int>(out.size()) < keep_k; ++k) {
    out.push_back(ranked[k].index);
  }
  return out;
}

}  // namespace vcfs
