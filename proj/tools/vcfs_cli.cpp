// vcfs command-line entry point: select, simulate, basis-check.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vcfs/vcfs.hpp"

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<int> parse_initial(const std::string& spec, int p) {
  if (spec == "intercept") return {0};
  if (spec == "empty") return {};
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = -1;
    try {
      std::size_t used = 0;
      v = std::stoi(item, &used);
      if (used != item.size()) v = -1;
    } catch (const std::exception&) {
      v = -1;
    }
    if (v < 0 || v > p) {
      throw vcfs::InvalidConfiguration("--initial: '" + item + "' is not a covariate index in [0, " +
                                       std::to_string(p) + "]");
    }
    out.push_back(v);
  }
  return out;
}

struct SelectArgs {
  std::string data;
  std::string y_column = "y";
  std::string t_column = "t";
  int dim_L = 7;
  int order = 4;
  std::string eta_rule = "explicit";
  double eta = 0.0;
  int patience = 5;
  int max_steps = -1;
  std::string criterion = "argmin-sigma";
  int screen_k = 0;
  std::string initial = "intercept";
  std::string out = "report.json";
  std::string curves_out;
  int grid_points = 101;
  int workers = 1;
  bool no_timestamp = false;
};

int run_select(const SelectArgs& a, bool eta_given) {
  const vcfs::EtaRule rule = vcfs::parse_eta_rule(a.eta_rule);
  if (rule == vcfs::EtaRule::automatic && eta_given) {
    throw vcfs::InvalidConfiguration("--eta cannot be combined with --eta-rule auto");
  }
  const vcfs::SplineBasis basis = vcfs::build_basis(a.dim_L, a.order);
  const vcfs::Dataset data = vcfs::load_csv(a.data, a.y_column, a.t_column, 2 * static_cast<Eigen::Index>(a.dim_L));

  vcfs::EbicConfig cfg;
  cfg.eta_rule = rule;
  cfg.eta = a.eta;
  cfg.patience = a.patience;
  if (a.max_steps >= 0) cfg.max_steps = a.max_steps;

  vcfs::ForwardOptions opts;
  opts.criterion = vcfs::parse_criterion(a.criterion);
  opts.workers = a.workers;
  const std::vector<int> initial = parse_initial(a.initial, data.p());
  if (a.screen_k > 0) opts.candidate_pool = vcfs::marginal_rank_screen(data, basis, a.screen_k, a.workers);

  vcfs::SelectionTrace trace = vcfs::run_forward(data, basis, cfg, initial, opts);
  vcfs::Report report = vcfs::make_report(data, basis, std::move(trace), a.grid_points);
  if (!a.no_timestamp) report.timestamp = utc_timestamp();
  report.config = {{"command", "select"},
                   {"data", a.data},
                   {"y_column", a.y_column},
                   {"t_column", a.t_column},
                   {"L", a.dim_L},
                   {"order", a.order},
                   {"eta_rule", a.eta_rule},
                   {"eta", report.trace.eta},
                   {"patience", a.patience},
                   {"max_steps", report.trace.max_steps},
                   {"criterion", a.criterion},
                   {"screen_k", a.screen_k},
                   {"initial", a.initial},
                   {"grid_points", a.grid_points}};
  if (opts.candidate_pool) report.config["screened_pool"] = *opts.candidate_pool;
  vcfs::write_report(report, a.out);
  if (!a.curves_out.empty()) vcfs::write_curves(report, a.curves_out);

  std::cout << "selected:";
  for (int j : report.trace.final_set) std::cout << ' ' << report.name_of(j);
  std::cout << "\nstop: " << vcfs::to_string(report.trace.stop_reason) << " after "
            << report.trace.steps.size() << " steps (kept " << report.trace.kept_steps << ")\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

struct SimulateArgs {
  std::string scenario;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string out = "aggregate.json";
  std::string reps_out = "reps.csv";
  int workers = 1;
  int mc_samples = 200000;
  bool no_timestamp = false;
};

int run_simulate(const SimulateArgs& a) {
  std::map<std::string, std::string> kv;
  if (!a.scenario.empty()) kv = vcfs::read_key_value_file(a.scenario);
  for (const auto& [k, v] : a.overrides) kv[k] = v;
  if (kv.count("eta_rule") && kv.at("eta_rule") == "auto" && kv.count("eta")) {
    throw vcfs::InvalidConfiguration("eta conflicts with eta_rule=auto");
  }
  const vcfs::SimScenario sc = vcfs::scenario_from_key_values(kv);
  const auto reps = vcfs::run_scenario(sc, a.workers);
  std::vector<vcfs::RepMetrics> metrics;
  for (const auto& r : reps) metrics.push_back(r.metrics);
  const double snr = vcfs::snr(sc, a.mc_samples);
  const vcfs::AggregateMetrics agg = vcfs::aggregate(metrics, snr);
  const vcfs::TrueCorrelations corr = vcfs::true_correlations(sc.t1, sc.t2);

  vcfs::ordered_json j;
  j["schema"] = vcfs::kReportSchema;
  j["tool"] = {{"name", "vcfs"}, {"version", vcfs::kVersion}};
  if (!a.no_timestamp) j["timestamp"] = utc_timestamp();
  j["scenario"] = {{"example", vcfs::to_string(sc.example)},
                   {"n", sc.n},
                   {"p", sc.p},
                   {"t1", sc.t1},
                   {"t2", sc.t2},
                   {"seed", sc.seed},
                   {"reps", sc.reps},
                   {"test_fraction", sc.test_fraction},
                   {"L", sc.dim_L},
                   {"order", sc.order},
                   {"eta_rule", vcfs::to_string(sc.ebic.eta_rule)},
                   {"eta", vcfs::resolve_eta(sc.ebic, sc.n, sc.p)},
                   {"patience", sc.ebic.patience},
                   {"criterion", vcfs::to_string(sc.criterion)},
                   {"screen_k", sc.screen_k}};
  j["true_correlations"] = {{"xx", corr.xx}, {"xt", corr.xt}};
  j["aggregate"] = vcfs::to_json(agg);
  vcfs::write_json(j, a.out);
  vcfs::write_rep_csv(reps, a.reps_out);

  std::cout << "reps=" << agg.reps << " TP=" << agg.mean_tp << " FP=" << agg.mean_fp << " PE=" << agg.mean_pe
            << " size=" << agg.mean_size << " SNR=" << agg.snr_estimate << '\n';
  return 0;
}

int run_basis_check(int dim_L, int order, int points) {
  const vcfs::SplineBasis basis = vcfs::build_basis(dim_L, order);
  double worst_sum = 0.0;
  double min_value = 0.0;
  int max_nonzero = 0;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    const Eigen::VectorXd b = basis.eval(t);
    worst_sum = std::max(worst_sum, std::abs(b.sum() - 1.0));
    min_value = std::min(min_value, b.minCoeff());
    max_nonzero = std::max(max_nonzero, static_cast<int>((b.array() != 0.0).count()));
  }
  std::cout << "L=" << dim_L << " order=" << order << " knots:";
  for (double k : basis.knots()) std::cout << ' ' << k;
  std::cout << "\npoints=" << points << " max|sum-1|=" << worst_sum << " min_value=" << min_value
            << " max_nonzero=" << max_nonzero << '\n';
  const bool ok = worst_sum <= 1e-12 && min_value >= 0.0 && max_nonzero <= order;
  std::cout << (ok ? "partition of unity: ok" : "partition of unity: FAILED") << '\n';
  return ok ? 0 : static_cast<int>(vcfs::ErrorKind::numerical);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward variable selection for varying coefficient models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vcfs::kVersion);

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Run forward selection on a CSV dataset");
  select->add_option("--data", sel.data, "Input CSV with a header row")->required();
  select->add_option("--y", sel.y_column, "Response column name")->capture_default_str();
  select->add_option("--t", sel.t_column, "Index variable column name")->capture_default_str();
  select->add_option("--L", sel.dim_L, "Spline basis dimension")->capture_default_str();
  select->add_option("--order", sel.order, "Spline order (degree + 1)")->capture_default_str();
  select->add_option("--eta-rule", sel.eta_rule, "explicit or auto")
      ->check(CLI::IsMember({"explicit", "auto"}))
      ->capture_default_str();
  auto* eta_opt = select->add_option("--eta", sel.eta, "EBIC eta (0 = BIC)")->capture_default_str();
  select->add_option("--patience", sel.patience, "Consecutive EBIC increases before stopping")
      ->capture_default_str();
  select->add_option("--max-steps", sel.max_steps, "Cap on accepted covariates (default n/2L - |S1|)");
  select->add_option("--criterion", sel.criterion, "argmin-sigma or argmax-corr")
      ->check(CLI::IsMember({"argmin-sigma", "argmax-corr"}))
      ->capture_default_str();
  select->add_option("--screen-k", sel.screen_k, "Keep the top k covariates by marginal BIC (0 = off)")
      ->capture_default_str();
  select->add_option("--initial", sel.initial, "intercept, empty, or a comma list of indices")
      ->capture_default_str();
  select->add_option("--out", sel.out, "Report JSON path")->capture_default_str();
  select->add_option("--curves-out", sel.curves_out, "Coefficient curve CSV path");
  select->add_option("--grid-points", sel.grid_points, "Curve grid size")->capture_default_str();
  select->add_option("--workers", sel.workers, "Threads for the candidate sweep")->capture_default_str();
  select->add_flag("--no-timestamp", sel.no_timestamp, "Omit the timestamp for reproducible output");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic experiment");
  simulate->add_option("--scenario", sim.scenario, "Scenario file of key=value lines");
  std::vector<std::string> sets;
  simulate->add_option("--set", sets, "Override a scenario key, e.g. --set reps=10");
  for (const auto& key : vcfs::scenario_keys()) {
    simulate->add_option_function<std::string>(
        "--" + key, [&sim, key](const std::string& v) { sim.overrides.emplace_back(key, v); },
        "Scenario key '" + key + "'");
  }
  simulate->add_option("--out", sim.out, "Aggregate JSON path")->capture_default_str();
  simulate->add_option("--reps-out", sim.reps_out, "Per-repetition CSV path")->capture_default_str();
  simulate->add_option("--workers", sim.workers, "Threads across repetitions")->capture_default_str();
  simulate->add_option("--mc-samples", sim.mc_samples, "Monte Carlo samples for the SNR")->capture_default_str();
  simulate->add_flag("--no-timestamp", sim.no_timestamp, "Omit the timestamp for reproducible output");

  int basis_L = 7;
  int basis_order = 4;
  int basis_points = 1000;
  auto* check = app.add_subcommand("basis-check", "Print partition-of-unity diagnostics");
  check->add_option("--L", basis_L, "Spline basis dimension")->capture_default_str();
  check->add_option("--order", basis_order, "Spline order")->capture_default_str();
  check->add_option("--points", basis_points, "Evaluation points on [0,1]")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(vcfs::ErrorKind::usage);
  }

  try {
    if (select->parsed()) return run_select(sel, eta_opt->count() > 0);
    if (simulate->parsed()) {
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw vcfs::InvalidConfiguration("--set expects key=value, got '" + s + "'");
        sim.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      return run_simulate(sim);
    }
    if (check->parsed()) return run_basis_check(basis_L, basis_order, basis_points);
  } catch (const vcfs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(vcfs::ErrorKind::data);
  }
  return static_cast<int>(vcfs::ErrorKind::usage);
}
