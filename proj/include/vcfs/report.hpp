#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vcfs/dataset.hpp"
#include "vcfs/error.hpp"
#include "vcfs/regression.hpp"
#include "vcfs/selector.hpp"
#include "vcfs/simulation.hpp"
#include "vcfs/spline.hpp"

namespace vcfs {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kReportSchema = 1;

using ordered_json = nlohmann::ordered_json;

/// Equally spaced grid 0, 1/(points-1), ..., 1.
inline Eigen::VectorXd curve_grid(int points = 101) {
  if (points < 2) throw InvalidConfiguration("curve grid needs at least two points");
  return Eigen::VectorXd::LinSpaced(points, 0.0, 1.0);
}

/// Everything a `select` run produces.
struct Report {
  ordered_json config = ordered_json::object();
  std::optional<std::string> timestamp;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> column_names;
  Eigen::Index n = 0;
  int p = 0;
  RescaleMap rescale;
  std::vector<int> excluded;
  SelectionTrace trace;
  FitResult fit;
  Eigen::VectorXd grid;
  std::vector<Eigen::VectorXd> curves;  // one per final_set entry
  std::optional<RepMetrics> metrics;
  std::vector<std::string> warnings;

  std::string name_of(int j) const { return column_names.at(static_cast<std::size_t>(j)); }
};

/// Refits the final set and evaluates its coefficient curves.
inline Report make_report(const Dataset& data, const SplineBasis& basis, SelectionTrace trace,
                          int grid_points = 101) {
  Report r;
  r.column_names = data.column_names;
  r.n = data.n();
  r.p = data.p();
  r.rescale = data.rescale;
  r.excluded = data.excluded;
  r.fit = fit_set(data, basis, trace.final_set);
  r.grid = curve_grid(grid_points);
  for (int j : trace.final_set) r.curves.push_back(coefficient_curve(r.fit, basis, j, r.grid));
  r.warnings = trace.warnings;
  for (int j : data.excluded) {
    r.warnings.push_back("covariate '" + data.column_names[static_cast<std::size_t>(j)] +
                         "' is constant and was excluded from the candidate pool");
  }
  if (!r.fit.rank_ok) r.warnings.push_back("final design is numerically rank-deficient; ridge fallback used");
  r.trace = std::move(trace);
  return r;
}

inline ordered_json to_json(const RepMetrics& m) {
  return ordered_json{{"tp", m.tp}, {"fp", m.fp}, {"pe", m.pe}, {"model_size", m.model_size}};
}

inline ordered_json to_json(const AggregateMetrics& a) {
  ordered_json j;
  j["reps"] = a.reps;
  j["mean_tp"] = a.mean_tp;
  j["mean_fp"] = a.mean_fp;
  j["mean_pe"] = a.mean_pe;
  j["mean_size"] = a.mean_size;
  j["rsd_tp"] = a.rsd_tp;
  j["rsd_fp"] = a.rsd_fp;
  j["rsd_pe"] = a.rsd_pe;
  j["rsd_size"] = a.rsd_size;
  j["snr_estimate"] = a.snr_estimate;
  return j;
}

inline ordered_json to_json(const Report& r) {
  ordered_json j;
  j["schema"] = kReportSchema;
  j["tool"] = {{"name", "vcfs"}, {"version", kVersion}};
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  if (r.seed) j["seed"] = *r.seed;
  j["config"] = r.config;
  j["dataset"] = {{"n", r.n},
                  {"p", r.p},
                  {"columns", r.column_names},
                  {"t_rescale", {{"shift", r.rescale.shift}, {"width", r.rescale.width}}},
                  {"excluded", r.excluded}};

  ordered_json steps = ordered_json::array();
  for (const auto& s : r.trace.steps) {
    steps.push_back({{"index", s.chosen_index},
                     {"name", r.name_of(s.chosen_index)},
                     {"sigma_sq", s.sigma_sq_after},
                     {"ebic", s.ebic_after},
                     {"delta_rss", s.delta_rss}});
  }
  j["trace"] = {{"eta", r.trace.eta},
                {"max_steps", r.trace.max_steps},
                {"initial_set", r.trace.initial_set},
                {"steps", steps},
                {"kept_steps", r.trace.kept_steps},
                {"stop_reason", to_string(r.trace.stop_reason)}};

  std::vector<std::string> names;
  for (int k : r.trace.final_set) names.push_back(r.name_of(k));
  j["final_set"] = {{"indices", r.trace.final_set}, {"names", names}};
  j["sigma_sq_path"] = r.trace.sigma_sq_path();
  j["ebic_path"] = r.trace.ebic_path();

  ordered_json curves = ordered_json::object();
  curves["grid"] = std::vector<double>(r.grid.data(), r.grid.data() + r.grid.size());
  for (std::size_t k = 0; k < r.curves.size(); ++k) {
    const auto& c = r.curves[k];
    curves[r.name_of(r.trace.final_set[k])] = std::vector<double>(c.data(), c.data() + c.size());
  }
  j["curves"] = curves;
  if (r.metrics) j["metrics"] = to_json(*r.metrics);
  j["warnings"] = r.warnings;
  return j;
}

inline void write_json(const ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline ordered_json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_report(const Report& r, const std::string& path) { write_json(to_json(r), path); }

/// CSV with header `t,<name>...` and one row per grid point.
inline void write_curves(const Report& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << 't';
  for (int j : r.trace.final_set) out << ',' << r.name_of(j);
  out << '\n';
  char tbuf[32];
  for (Eigen::Index i = 0; i < r.grid.size(); ++i) {
    std::snprintf(tbuf, sizeof tbuf, "%.2f", r.grid(i));
    out << tbuf;
    for (const auto& c : r.curves) out << ',' << detail::format_double(c(i));
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

/// Per-repetition CSV: rep,tp,fp,pe,model_size,stop_reason,selected.
inline void write_rep_csv(const std::vector<RepResult>& reps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "rep,tp,fp,pe,model_size,stop_reason,selected\n";
  for (const auto& r : reps) {
    out << r.rep << ',' << r.metrics.tp << ',' << r.metrics.fp << ',' << detail::format_double(r.metrics.pe)
        << ',' << r.metrics.model_size << ',' << to_string(r.stop_reason) << ',';
    for (std::size_t k = 0; k < r.selected.size(); ++k) out << (k ? ";" : "") << r.selected[k];
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace vcfs
