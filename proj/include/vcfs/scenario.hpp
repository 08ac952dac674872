#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vcfs/error.hpp"
#include "vcfs/simulation.hpp"

namespace vcfs {

inline const std::vector<std::string>& scenario_keys() {
  static const std::vector<std::string> keys{"example", "n",       "p",        "t1",        "t2",
                                             "seed",    "reps",    "L",        "order",     "eta_rule",
                                             "eta",     "patience", "criterion", "screen_k", "test_fraction"};
  return keys;
}

/// Flat `key = value` lines; `#` starts a comment. Later keys override earlier ones.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string{};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfiguration(source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfiguration("cannot open scenario file '" + path + "'");
  return parse_key_values(in, path);
}

namespace detail {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw InvalidConfiguration("scenario key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace detail

inline Criterion parse_criterion(const std::string& text) {
  if (text == "argmin-sigma" || text == "argmin_sigma") return Criterion::argmin_sigma;
  if (text == "argmax-corr" || text == "argmax_corr") return Criterion::argmax_corr;
  throw InvalidConfiguration("criterion must be argmin-sigma or argmax-corr, got '" + text + "'");
}

inline EtaRule parse_eta_rule(const std::string& text) {
  if (text == "auto") return EtaRule::automatic;
  if (text == "explicit") return EtaRule::explicit_value;
  throw InvalidConfiguration("eta_rule must be auto or explicit, got '" + text + "'");
}

/// Applies one key to `sc`; unknown keys raise a usage error listing the valid ones.
inline void apply_scenario_key(SimScenario& sc, const std::string& key, const std::string& value) {
  if (key == "example") {
    if (value == "ex1" || value == "1") {
      sc.example = Example::ex1;
    } else if (value == "ex2" || value == "2") {
      sc.example = Example::ex2;
    } else {
      throw InvalidConfiguration("example must be ex1 or ex2, got '" + value + "'");
    }
  } else if (key == "n") {
    sc.n = detail::parse_value<int>(key, value);
  } else if (key == "p") {
    sc.p = detail::parse_value<int>(key, value);
  } else if (key == "t1") {
    sc.t1 = detail::parse_value<double>(key, value);
  } else if (key == "t2") {
    sc.t2 = detail::parse_value<double>(key, value);
  } else if (key == "seed") {
    sc.seed = detail::parse_value<std::uint64_t>(key, value);
  } else if (key == "reps") {
    sc.reps = detail::parse_value<int>(key, value);
  } else if (key == "L") {
    sc.dim_L = detail::parse_value<int>(key, value);
  } else if (key == "order") {
    sc.order = detail::parse_value<int>(key, value);
  } else if (key == "eta_rule") {
    sc.ebic.eta_rule = parse_eta_rule(value);
  } else if (key == "eta") {
    sc.ebic.eta = detail::parse_value<double>(key, value);
  } else if (key == "patience") {
    sc.ebic.patience = detail::parse_value<int>(key, value);
  } else if (key == "criterion") {
    sc.criterion = parse_criterion(value);
  } else if (key == "screen_k") {
    sc.screen_k = detail::parse_value<int>(key, value);
  } else if (key == "test_fraction") {
    sc.test_fraction = detail::parse_value<double>(key, value);
  } else {
    std::string valid;
    for (const auto& k : scenario_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw InvalidConfiguration("unknown scenario key '" + key + "'; valid keys: " + valid);
  }
}

inline SimScenario scenario_from_key_values(const std::map<std::string, std::string>& kv,
                                            SimScenario base = {}) {
  if (kv.count("eta") && kv.count("eta_rule") && kv.at("eta_rule") == "auto") {
    throw InvalidConfiguration("eta conflicts with eta_rule=auto");
  }
  for (const auto& [k, v] : kv) apply_scenario_key(base, k, v);
  base.validate();
  return base;
}

}  // namespace vcfs
