// Copyright 2026 The CLOL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "clol/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace clol {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split(v, ',')) out.push_back(static_cast<int>(to_int(key, item)));
  return out;
}

std::string resolve(const std::filesystem::path& base, const std::string& v) {
  const std::filesystem::path p(v);
  return p.is_absolute() ? p.string() : (base / p).string();
}

std::string resolve_state(const std::filesystem::path& base, const std::string& v,
                          std::initializer_list<const char*> keywords) {
  for (const char* k : keywords) {
    if (v == k) return v;
  }
  return resolve(base, v);
}

}  // namespace

int RunConfig::n_ref() const {
  return oversample * *std::max_element(grids.begin(), grids.end());
}

unsigned RunConfig::effective_workers() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ButcherTableau> RunConfig::methods() const {
  std::vector<ButcherTableau> out;
  for (int o : orders) {
    if (tableau_override && tableau_override->order == o) {
      out.push_back(*tableau_override);
    } else {
      out.push_back(tableau(o));
    }
  }
  return out;
}

void RunConfig::validate() const {
  if (system != "twoqubit" && system != "file") {
    throw ConfigError("config: system must be 'twoqubit' or 'file'");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("config: horizon must be > 0");
  if (orders.empty()) throw ConfigError("config: orders must be nonempty");
  for (int o : orders) {
    if (o < 1 || o > 5) throw ConfigError("config: orders must lie in 1..5");
  }
  if (grids.empty()) throw ConfigError("config: grids must be nonempty");
  for (int n : grids) {
    if (n < 1) throw ConfigError("config: grid sizes must be positive");
  }
  if (oversample < 1) throw ConfigError("config: oversample must be >= 1");
  const long long n_ref_ll =
      static_cast<long long>(oversample) * *std::max_element(grids.begin(), grids.end());
  if (n_ref_ll > (1LL << 26)) throw ConfigError("config: oversample * max(grids) is too large");
  for (int n : grids) {
    if (n_ref_ll % n != 0) {
      throw ConfigError("config: grid " + std::to_string(n) + " does not divide oversample*max(grids)");
    }
  }
  if (!(tol_ref > 0.0)) throw ConfigError("config: tol_ref must be > 0");
  if (!(t_long > 0.0)) throw ConfigError("config: t_long must be > 0");
  if (trace_steps < 1 || trace_stride < 1) throw ConfigError("config: trace_steps/stride must be >= 1");
  if (trace_start != "rho0" && trace_start != "target") {
    throw ConfigError("config: trace_start must be 'rho0' or 'target'");
  }
  if (system == "file") {
    if (h0_path.empty() || control_paths.empty()) {
      throw ConfigError("config: file systems need h0 and controls");
    }
    if (protocol_paths.size() != control_paths.size()) {
      throw ConfigError("config: one protocol matrix per control is required");
    }
    if (!protocol_offsets.empty() && protocol_offsets.size() != control_paths.size()) {
      throw ConfigError("config: offsets must match the number of controls");
    }
    if (rho0 == "default" || (sigma0 == "default")) {
      throw ConfigError("config: file systems need explicit rho0 and sigma0");
    }
    if ((rho0 == "target" || trace_start == "target") && target_path.empty()) {
      throw ConfigError("config: 'target' requires a target matrix");
    }
  }
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  std::optional<int> tab_order;
  std::optional<std::string> tab_a;
  std::optional<std::string> tab_b;
  std::optional<std::string> tab_c;
  VerifyThresholds& th = cfg.thresholds;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"system", [&](auto&, auto& v) { cfg.system = v; }},
      {"h0", [&](auto&, auto& v) { cfg.h0_path = resolve(base_dir, v); }},
      {"controls",
       [&](auto&, auto& v) {
         for (const auto& p : split(v, ',')) cfg.control_paths.push_back(resolve(base_dir, p));
       }},
      {"protocols",
       [&](auto&, auto& v) {
         for (const auto& p : split(v, ',')) cfg.protocol_paths.push_back(resolve(base_dir, p));
       }},
      {"offsets", [&](auto& k, auto& v) { cfg.protocol_offsets = to_doubles(k, v); }},
      {"target", [&](auto&, auto& v) { cfg.target_path = resolve(base_dir, v); }},
      {"rho0", [&](auto&, auto& v) { cfg.rho0 = resolve_state(base_dir, v, {"default", "target"}); }},
      {"sigma0", [&](auto&, auto& v) { cfg.sigma0 = resolve_state(base_dir, v, {"default", "rho0"}); }},
      {"horizon", [&](auto& k, auto& v) { cfg.horizon = to_double(k, v); }},
      {"gain", [&](auto& k, auto& v) { cfg.gain = to_double(k, v); }},
      {"grids", [&](auto& k, auto& v) { cfg.grids = to_ints(k, v); }},
      {"orders", [&](auto& k, auto& v) { cfg.orders = to_ints(k, v); }},
      {"oversample", [&](auto& k, auto& v) { cfg.oversample = static_cast<int>(to_int(k, v)); }},
      {"tol_ref", [&](auto& k, auto& v) { cfg.tol_ref = to_double(k, v); }},
      {"workers", [&](auto& k, auto& v) { cfg.workers = static_cast<unsigned>(to_int(k, v)); }},
      {"seed", [&](auto& k, auto& v) { cfg.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"out", [&](auto&, auto& v) { cfg.out_dir = resolve(base_dir, v); }},
      {"t_long", [&](auto& k, auto& v) { cfg.t_long = to_double(k, v); }},
      {"v_threshold", [&](auto& k, auto& v) { cfg.v_threshold = to_double(k, v); }},
      {"trace_steps", [&](auto& k, auto& v) { cfg.trace_steps = static_cast<int>(to_int(k, v)); }},
      {"trace_stride", [&](auto& k, auto& v) { cfg.trace_stride = static_cast<int>(to_int(k, v)); }},
      {"trace_start", [&](auto&, auto& v) { cfg.trace_start = v; }},
      {"jitter", [&](auto& k, auto& v) { th.jitter = to_double(k, v); }},
      {"decrease_factor", [&](auto& k, auto& v) { th.decrease_factor = to_double(k, v); }},
      {"eps_pass", [&](auto& k, auto& v) { th.eps_pass = to_double(k, v); }},
      {"rk1_e_slope", [&](auto& k, auto& v) { th.rk1_e_slope = to_double(k, v); }},
      {"high_order_e_slope", [&](auto& k, auto& v) { th.high_order_e_slope = to_double(k, v); }},
      {"rate_lo", [&](auto& k, auto& v) { th.rate_lo = to_double(k, v); }},
      {"rate_hi", [&](auto& k, auto& v) { th.rate_hi = to_double(k, v); }},
      {"rate_min_n", [&](auto& k, auto& v) { th.rate_min_n = static_cast<int>(to_int(k, v)); }},
      {"limit_deviation", [&](auto& k, auto& v) { th.limit_deviation = to_double(k, v); }},
      {"overlap", [&](auto& k, auto& v) { th.overlap = to_double(k, v); }},
      {"overlap_min_n", [&](auto& k, auto& v) { th.overlap_min_n = static_cast<int>(to_int(k, v)); }},
      {"overlap_orders", [&](auto& k, auto& v) { th.overlap_orders = to_ints(k, v); }},
      {"noise_floor", [&](auto& k, auto& v) { th.noise_floor = to_double(k, v); }},
      {"vacuous_limit", [&](auto& k, auto& v) { th.vacuous_limit = to_double(k, v); }},
      {"appendix_a_tol", [&](auto& k, auto& v) { th.appendix_a_tol = to_double(k, v); }},
      {"appendix_b_tol", [&](auto& k, auto& v) { th.appendix_b_tol = to_double(k, v); }},
      {"appendix_times", [&](auto& k, auto& v) { cfg.appendix_times = static_cast<int>(to_int(k, v)); }},
      {"appendix_pairs", [&](auto& k, auto& v) { cfg.appendix_pairs = static_cast<int>(to_int(k, v)); }},
      {"tableau_order", [&](auto& k, auto& v) { tab_order = static_cast<int>(to_int(k, v)); }},
      {"tableau_a", [&](auto&, auto& v) { tab_a = v; }},
      {"tableau_b", [&](auto&, auto& v) { tab_b = v; }},
      {"tableau_c", [&](auto&, auto& v) { tab_c = v; }},
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second(key, value);
  }

  if (tab_order || tab_a || tab_b || tab_c) {
    if (!tab_order || !tab_a || !tab_b || !tab_c) {
      throw ConfigError("config: tableau override needs tableau_order, tableau_a, tableau_b, tableau_c");
    }
    ButcherTableau t;
    t.order = *tab_order;
    t.b = to_doubles("tableau_b", *tab_b);
    t.c = to_doubles("tableau_c", *tab_c);
    t.stages = static_cast<int>(t.b.size());
    for (const auto& row : split(*tab_a, ';')) t.a.push_back(to_doubles("tableau_a", row));
    cfg.tableau_override = std::move(t);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : ".");
}

ComplexMatrix parse_matrix(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ConfigError("matrix: bad number '" + token + "'");
    }
  }
  if (values.size() % 2 != 0) throw ConfigError("matrix: odd number of values");
  const auto count = values.size() / 2;
  const auto dim = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(count))));
  if (dim < 2 || static_cast<std::size_t>(dim * dim) != count) {
    throw ConfigError("matrix: entry count " + std::to_string(count) + " is not a square >= 4");
  }
  ComplexMatrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto q = static_cast<std::size_t>(2 * (i * dim + j));
      m(i, j) = Complex(values[q], values[q + 1]);
    }
  }
  return m;
}

ComplexMatrix load_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("matrix: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_matrix(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace clol
