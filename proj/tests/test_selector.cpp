#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vcfs/selector.hpp"
#include "vcfs/simulation.hpp"

namespace {

using vcfs::build_basis;
using vcfs::Criterion;

double brute_sigma(const vcfs::Dataset& d, const vcfs::SplineBasis& basis, const std::vector<int>& set) {
  return vcfs::oracle::sigma_sq_normal_equations(vcfs::oracle::stack_design(d, basis, set), d.y);
}

TEST(Ebic, TrivialValues) {
  EXPECT_EQ(vcfs::ebic(1.0, 0, 400, 1000, 7, 0.0), 0.0);
  EXPECT_EQ(vcfs::ebic(2.0, 0, 400, 1000, 7, 0.0), vcfs::ebic(2.0, 0, 400, 1000, 7, 0.7));
}

TEST(Ebic, BicExample) {
  // 400 log 2 + 21 log 400, evaluated at 30 digits
  EXPECT_NEAR(vcfs::ebic(2.0, 3, 400, 1000, 7, 0.0), 403.079627713245745, 1e-9);
}

TEST(Ebic, EtaZeroIsBic) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int k = 0; k < 100; ++k) {
    const double s = u(rng);
    const int size = k % 9;
    EXPECT_EQ(vcfs::ebic(s, size, 400, 1000, 7, 0.0), vcfs::bic(s, size, 400, 7));
  }
}

TEST(Ebic, NonPositiveVarianceIsUnderflow) {
  EXPECT_THROW(vcfs::ebic(0.0, 1, 100, 10, 7, 0.0), vcfs::NumericalUnderflow);
  EXPECT_THROW(vcfs::ebic(-1.0, 1, 100, 10, 7, 0.0), vcfs::NumericalUnderflow);
}

TEST(AutoEta, MatchesFormulaAndClamps) {
  EXPECT_NEAR(vcfs::auto_eta(400, 1000), 0.710882223185782, 1e-12);
  EXPECT_NEAR(vcfs::auto_eta(506, 12), 0.164752437169865, 1e-12);
  std::vector<std::string> warnings;
  EXPECT_EQ(vcfs::auto_eta(1000, 5, &warnings), 0.0);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_THROW(vcfs::auto_eta(100, 1), vcfs::InvalidConfiguration);
}

TEST(SelectCandidate, SingleCandidatePool) {
  std::mt19937_64 rng(2);
  const auto basis = build_basis(5, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 60, 4);
  const vcfs::CandidateSweep sweep(d, basis, {0}, {3});
  EXPECT_EQ(vcfs::select_candidate(sweep, Criterion::argmin_sigma).index, 3);
  EXPECT_EQ(vcfs::select_candidate(sweep, Criterion::argmax_corr).index, 3);
}

TEST(SelectCandidate, DuplicateColumnsPreferSmallerIndex) {
  std::mt19937_64 rng(3);
  const auto basis = build_basis(5, 4);
  auto d = vcfs::oracle::random_dataset(rng, 80, 4, 1);
  // make covariate 3 an exact copy of the strong covariate 1
  d.x.col(3) = d.x.col(1);
  const vcfs::CandidateSweep sweep(d, basis, {0}, vcfs::default_pool(d, {0}));
  const auto scores = sweep.score_all();
  ASSERT_TRUE(scores[0] && scores[2]);
  EXPECT_EQ(scores[0]->delta, scores[2]->delta);
  EXPECT_EQ(sweep.select(Criterion::argmin_sigma).index, 1);
}

TEST(SelectCandidate, AllDegenerateRaisesNoCandidate) {
  std::mt19937_64 rng(4);
  const auto basis = build_basis(5, 4);
  auto d = vcfs::oracle::random_dataset(rng, 60, 3);
  d.x.col(2) = d.x.col(1);
  d.x.col(3) = -2.0 * d.x.col(1);
  vcfs::CandidateSweep sweep(d, basis, {0, 1}, {2, 3});
  EXPECT_THROW(sweep.select(Criterion::argmin_sigma), vcfs::NoCandidate);
}

// argmin over candidates agrees with brute-force full refits of every S(l).
TEST(SelectCandidate, AgreesWithBruteForceRefits) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n_dist(40, 100), p_dist(3, 15), l_dist(4, 6);
  for (int inst = 0; inst < 25; ++inst) {
    const int n = n_dist(rng), p = p_dist(rng), L = l_dist(rng);
    const auto basis = build_basis(L, 4);
    const auto d = vcfs::oracle::random_dataset(rng, n, p, 3);
    const std::vector<int> s{0};
    const vcfs::CandidateSweep sweep(d, basis, s, vcfs::default_pool(d, s));
    int best = -1;
    double best_sigma = 0.0;
    for (int l = 1; l <= p; ++l) {
      const double sig = brute_sigma(d, basis, {0, l});
      if (best < 0 || sig < best_sigma) {
        best = l;
        best_sigma = sig;
      }
    }
    EXPECT_EQ(sweep.select(Criterion::argmin_sigma).index, best) << "instance " << inst;
  }
}

TEST(SelectCandidate, SweepMatchesStandaloneReductionAfterAccepts) {
  std::mt19937_64 rng(6);
  const auto basis = build_basis(6, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 100, 12, 4);
  vcfs::CandidateSweep sweep(d, basis, {0}, vcfs::default_pool(d, {0}));
  for (int j : {2, 5}) sweep.accept(j);
  const auto scores = sweep.score_all();
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const int l = sweep.pool()[k];
    if (sweep.cache().contains(l)) {
      EXPECT_FALSE(scores[k].has_value());
      continue;
    }
    const auto ref = vcfs::rss_reduction(sweep.cache(), sweep.block(l));
    ASSERT_TRUE(ref && scores[k]);
    EXPECT_NEAR(scores[k]->delta, ref->delta, 1e-10 * ref->delta + 1e-15);
  }
}

TEST(RunForward, PureNoiseUsuallyStopsAtIntercept) {
  const auto basis = build_basis(7, 4);
  int intercept_better = 0;
  int intercept_only = 0;
  for (int run = 0; run < 50; ++run) {
    std::mt19937_64 rng(1000 + run);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd y(200), t(200);
    Eigen::MatrixXd x(200, 20);
    for (int i = 0; i < 200; ++i) {
      y(i) = z(rng);
      t(i) = u(rng);
      for (int j = 0; j < 20; ++j) x(i, j) = z(rng);
    }
    const auto d = vcfs::make_dataset(y, t, x);
    const auto trace = vcfs::run_forward(d, basis, {}, {0});
    ASSERT_FALSE(trace.steps.empty());
    const int first = trace.steps.front().chosen_index;
    const double b0 = vcfs::bic(brute_sigma(d, basis, {0}), 1, 200, 7);
    const double b1 = vcfs::bic(brute_sigma(d, basis, {0, first}), 2, 200, 7);
    EXPECT_NEAR(trace.steps.front().ebic_after, b1, 1e-8 * std::abs(b1));
    if (b0 < b1) ++intercept_better;
    if (trace.final_set == std::vector<int>{0}) ++intercept_only;
  }
  EXPECT_GE(intercept_better, 45);
  EXPECT_GE(intercept_only, 45);
}

TEST(RunForward, TraceInvariants) {
  std::mt19937_64 rng(7);
  const auto basis = build_basis(6, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 200, 15, 4, 0.5);
  const auto trace = vcfs::run_forward(d, basis, {}, {0});
  const auto sig = trace.sigma_sq_path();
  const auto eb = trace.ebic_path();
  ASSERT_EQ(sig.size(), trace.steps.size() + 1);
  for (std::size_t k = 1; k < sig.size(); ++k) EXPECT_LE(sig[k], sig[k - 1]);
  // rollback to the global minimum
  const auto min_it = std::min_element(eb.begin(), eb.end());
  EXPECT_EQ(static_cast<std::size_t>(min_it - eb.begin()), trace.kept_steps);
  EXPECT_EQ(trace.final_set, trace.prefix_set(trace.kept_steps));
  // nesting and no repeats
  std::vector<int> seen = trace.initial_set;
  for (const auto& s : trace.steps) {
    EXPECT_EQ(std::count(seen.begin(), seen.end(), s.chosen_index), 0);
    seen.push_back(s.chosen_index);
  }
  // each recorded EBIC equals a brute-force refit of that prefix
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto set = trace.prefix_set(k + 1);
    const double ref = vcfs::bic(brute_sigma(d, basis, set), static_cast<int>(set.size()), 200, 6);
    EXPECT_NEAR(trace.steps[k].ebic_after, ref, 1e-8 * std::abs(ref));
  }
  EXPECT_EQ(trace.stop_reason, vcfs::StopReason::patience_exhausted);
}

TEST(RunForward, PatienceCountsConsecutiveRises) {
  std::mt19937_64 rng(8);
  const auto basis = build_basis(5, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 200, 30, 2);
  for (int patience : {1, 2, 5}) {
    vcfs::EbicConfig cfg;
    cfg.patience = patience;
    const auto trace = vcfs::run_forward(d, basis, cfg, {0});
    ASSERT_EQ(trace.stop_reason, vcfs::StopReason::patience_exhausted);
    const auto eb = trace.ebic_path();
    const std::size_t m = eb.size();
    ASSERT_GE(m, static_cast<std::size_t>(patience + 1));
    for (int k = 0; k < patience; ++k) EXPECT_GT(eb[m - 1 - k], eb[m - 2 - k]);
    // no earlier run of `patience` rises
    int rises = 0;
    for (std::size_t k = 1; k + 1 < m; ++k) {
      rises = eb[k] > eb[k - 1] ? rises + 1 : 0;
      EXPECT_LT(rises, patience);
    }
  }
}

TEST(RunForward, MaxStepsAndConfigChecks) {
  std::mt19937_64 rng(9);
  const auto basis = build_basis(5, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 100, 10, 5, 0.1);
  vcfs::EbicConfig cfg;
  cfg.max_steps = 2;
  const auto trace = vcfs::run_forward(d, basis, cfg, {0});
  EXPECT_EQ(trace.steps.size(), 2u);
  EXPECT_EQ(trace.stop_reason, vcfs::StopReason::max_steps);
  EXPECT_EQ(vcfs::default_max_steps(400, 7, 1), 27);

  cfg.max_steps = 21;  // 21 * 5 > 100
  EXPECT_THROW(vcfs::run_forward(d, basis, cfg, {0}), vcfs::InvalidConfiguration);
  vcfs::EbicConfig bad;
  bad.patience = 0;
  EXPECT_THROW(vcfs::run_forward(d, basis, bad, {0}), vcfs::InvalidConfiguration);
  EXPECT_THROW(vcfs::run_forward(d, basis, {}, {11}), vcfs::InvalidConfiguration);
}

TEST(RunForward, CandidatesExhausted) {
  std::mt19937_64 rng(10);
  const auto basis = build_basis(5, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 100, 2, 2);
  vcfs::EbicConfig cfg;
  cfg.patience = 10;
  const auto trace = vcfs::run_forward(d, basis, cfg, {0});
  EXPECT_EQ(trace.steps.size(), 2u);
  EXPECT_EQ(trace.stop_reason, vcfs::StopReason::candidates_exhausted);
}

TEST(RunForward, EmptyInitialSetCanPickIntercept) {
  std::mt19937_64 rng(11);
  const auto basis = build_basis(5, 4);
  auto d = vcfs::oracle::random_dataset(rng, 100, 5, 0, 0.1);
  d.y.array() += 5.0;
  const auto trace = vcfs::run_forward(d, basis, {}, {});
  ASSERT_FALSE(trace.steps.empty());
  EXPECT_EQ(trace.steps.front().chosen_index, 0);
}

TEST(RunForward, ExactFitStopsImmediately) {
  std::mt19937_64 rng(12);
  const auto basis = build_basis(5, 4);
  auto d = vcfs::oracle::random_dataset(rng, 60, 4);
  d.y = vcfs::design_block(basis, d.t, d.x.col(2), 2).matrix * Eigen::VectorXd::LinSpaced(5, 1.0, 2.0);
  const auto trace = vcfs::run_forward(d, basis, {}, {0});
  EXPECT_EQ(trace.stop_reason, vcfs::StopReason::exact_fit);
  EXPECT_EQ(trace.final_set, (std::vector<int>{0, 2}));
}

TEST(RunForward, DeterministicAcrossWorkerCounts) {
  std::mt19937_64 rng(13);
  const auto basis = build_basis(7, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 200, 300, 4);
  vcfs::ForwardOptions one, many;
  many.workers = 4;
  const auto a = vcfs::run_forward(d, basis, {}, {0}, one);
  const auto b = vcfs::run_forward(d, basis, {}, {0}, many);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_EQ(a.steps[k].chosen_index, b.steps[k].chosen_index);
    EXPECT_EQ(a.steps[k].sigma_sq_after, b.steps[k].sigma_sq_after);
    EXPECT_EQ(a.steps[k].ebic_after, b.steps[k].ebic_after);
  }
  EXPECT_EQ(a.final_set, b.final_set);
}

TEST(RunForward, ArgmaxCorrCriterionRuns) {
  std::mt19937_64 rng(14);
  const auto basis = build_basis(6, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 150, 20, 3, 0.5);
  vcfs::ForwardOptions opts;
  opts.criterion = Criterion::argmax_corr;
  const auto trace = vcfs::run_forward(d, basis, {}, {0}, opts);
  const vcfs::CandidateSweep sweep(d, basis, {0}, vcfs::default_pool(d, {0}));
  const auto scores = sweep.score_all();
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k]->corr_norm > scores[best]->corr_norm) best = k;
  }
  EXPECT_EQ(trace.steps.front().chosen_index, sweep.pool()[best]);
}

TEST(RunForward, ExampleOneFirstStepHitsTrueSupport) {
  vcfs::SimScenario sc;
  sc.seed = 4242;
  const auto rep = vcfs::generate(sc, 0);
  const auto basis = build_basis(7, 4);
  const vcfs::CandidateSweep sweep(rep.train, basis, {0}, vcfs::default_pool(rep.train, {0}));
  const auto scores = sweep.score_all();
  const int chosen = sweep.select(Criterion::argmin_sigma).index;
  EXPECT_GE(chosen, 1);
  EXPECT_LE(chosen, 4);
  // exhaustive check: every noise covariate scores below every true covariate
  double worst_true = 1e300, best_noise = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const int l = sweep.pool()[k];
    if (l <= 4) worst_true = std::min(worst_true, scores[k]->delta);
    else best_noise = std::max(best_noise, scores[k]->delta);
  }
  EXPECT_GT(worst_true, best_noise);
}

TEST(RunForward, ExampleOneUncorrelatedRecoversSupport) {
  vcfs::SimScenario sc;
  sc.seed = 99;
  const auto rep = vcfs::generate(sc, 3);
  const auto trace = vcfs::run_forward(rep.train, build_basis(7, 4), {}, {0});
  auto selected = trace.final_set;
  std::sort(selected.begin(), selected.end());
  EXPECT_EQ(selected, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(MarginalScreen, SingleCovariate) {
  std::mt19937_64 rng(15);
  const auto d = vcfs::oracle::random_dataset(rng, 50, 1);
  EXPECT_EQ(vcfs::marginal_rank_screen(d, build_basis(5, 4), 1), std::vector<int>{1});
  EXPECT_THROW(vcfs::marginal_rank_screen(d, build_basis(5, 4), 2), vcfs::InvalidConfiguration);
  EXPECT_THROW(vcfs::marginal_rank_screen(d, build_basis(5, 4), 0), vcfs::InvalidConfiguration);
}

TEST(MarginalScreen, DuplicateRanksAdjacent) {
  std::mt19937_64 rng(16);
  auto d = vcfs::oracle::random_dataset(rng, 120, 8, 2);
  d.x.col(6) = d.x.col(1);
  const auto ranked = vcfs::marginal_rank_screen(d, build_basis(6, 4), 8);
  const auto pos1 = std::find(ranked.begin(), ranked.end(), 1) - ranked.begin();
  const auto pos6 = std::find(ranked.begin(), ranked.end(), 6) - ranked.begin();
  EXPECT_EQ(pos6, pos1 + 1);
}

TEST(MarginalScreen, OrderMatchesMarginalBicRefits) {
  std::mt19937_64 rng(17);
  const auto basis = build_basis(5, 4);
  const auto d = vcfs::oracle::random_dataset(rng, 90, 12, 4);
  const auto ranked = vcfs::marginal_rank_screen(d, basis, 12);
  for (std::size_t k = 1; k < ranked.size(); ++k) {
    EXPECT_LE(brute_sigma(d, basis, {0, ranked[k - 1]}), brute_sigma(d, basis, {0, ranked[k]}) * (1 + 1e-10));
  }
}

TEST(MarginalScreen, ConstantCovariatesNeverCandidates) {
  std::mt19937_64 rng(18);
  auto raw = vcfs::oracle::random_dataset(rng, 60, 4);
  Eigen::MatrixXd cov = raw.x.rightCols(4);
  cov.col(2).setConstant(3.0);
  const auto d = vcfs::make_dataset(raw.y, raw.t, cov);
  EXPECT_EQ(d.excluded, std::vector<int>{3});
  const auto ranked = vcfs::marginal_rank_screen(d, build_basis(5, 4), 3);
  EXPECT_EQ(std::count(ranked.begin(), ranked.end(), 3), 0);
  const auto pool = vcfs::default_pool(d, {0});
  EXPECT_EQ(std::count(pool.begin(), pool.end(), 3), 0);
}

// With 996 noise covariates, top-50 marginal screening keeps the true support.
TEST(MarginalScreen, ExampleOneKeepsSupportInTopFifty) {
  vcfs::SimScenario sc;
  sc.seed = 777;
  const auto basis = build_basis(7, 4);
  int kept = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto data = vcfs::generate(sc, rep);
    const auto top = vcfs::marginal_rank_screen(data.train, basis, 50);
    bool all = true;
    for (int j = 1; j <= 4; ++j) all = all && std::find(top.begin(), top.end(), j) != top.end();
    kept += all;
  }
  std::cout << "support retained in " << kept << "/50 runs\n";
  EXPECT_GE(kept, 48);
}

}  // namespace
