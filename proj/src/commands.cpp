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

#include "clol/commands.hpp"

#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <system_error>

#include "clol/integrators.hpp"

namespace clol {

namespace {

ComplexMatrix load_state(const RunConfig& cfg, const std::string& spec) {
  if (spec == "target") {
    if (cfg.system == "twoqubit") return twoqubit::target_state();
    return load_matrix_file(cfg.target_path);
  }
  return load_matrix_file(spec);
}

std::filesystem::path out_file(const RunConfig& cfg, const char* name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

std::string status(const CheckReport& r) {
  if (!r.applicable) return "SKIP";
  return r.pass ? "PASS" : "FAIL";
}

void append(std::ostringstream& os, const CheckReport& r) {
  os << status(r) << ' ' << r.name;
  if (!r.pass) os << ": " << r.failure;
  os << '\n';
  for (const auto& d : r.details) os << "  " << d << '\n';
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    log << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ReferenceValidationError& e) {
    log << "reference failed validation: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kExitDivergence;
  }
}

}  // namespace

Problem build_problem(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.system == "twoqubit") {
    twoqubit::Setup setup = twoqubit::default_setup(cfg.gain, cfg.horizon);
    if (cfg.rho0 != "default") setup.rho0 = DensityMatrix(load_state(cfg, cfg.rho0));
    if (cfg.sigma0 == "rho0") {
      setup.sigma0 = setup.rho0;
    } else if (cfg.sigma0 != "default") {
      setup.sigma0 = DensityMatrix(load_state(cfg, cfg.sigma0));
    }
    return Problem{setup.sys, setup.rho0, setup.sigma0, setup.target.matrix(), setup};
  }

  std::vector<ComplexMatrix> controls;
  std::vector<FeedbackProtocol> protocols;
  for (std::size_t k = 0; k < cfg.control_paths.size(); ++k) {
    controls.push_back(load_matrix_file(cfg.control_paths[k]));
    const double c = cfg.protocol_offsets.empty() ? 0.0 : cfg.protocol_offsets[k];
    protocols.push_back(FeedbackProtocol::affine(load_matrix_file(cfg.protocol_paths[k]), c));
  }
  BilinearSystem sys(load_matrix_file(cfg.h0_path), std::move(controls), std::move(protocols));
  DensityMatrix rho0(load_state(cfg, cfg.rho0));
  DensityMatrix sigma0 = cfg.sigma0 == "rho0" ? rho0 : DensityMatrix(load_state(cfg, cfg.sigma0));
  std::optional<ComplexMatrix> target;
  if (!cfg.target_path.empty()) target = load_matrix_file(cfg.target_path);
  if (rho0.dim() != sys.dim() || sigma0.dim() != sys.dim()) {
    throw ConfigError("config: state dimensions do not match the Hamiltonians");
  }
  return Problem{std::move(sys), std::move(rho0), std::move(sigma0), std::move(target),
                 std::nullopt};
}

SweepSession run_sweep(const RunConfig& cfg, std::ostream& log) {
  Problem problem = build_problem(cfg);
  const std::vector<ButcherTableau> methods = cfg.methods();
  for (const auto& m : methods) m.validate();
  log << "reference: n_ref = " << cfg.n_ref() << '\n';
  ReferenceTrajectory ref = ReferenceTrajectory::build(
      problem.sys, problem.rho0, cfg.horizon, ReferenceOptions{cfg.n_ref(), cfg.tol_ref, true});
  log << "reference: validation error " << format_number(ref.validation_error()) << '\n';
  BoundConstants constants = bound_constants(problem.sys, ref);
  std::vector<SweepRecord> records = convergence_sweep(
      problem.sys, problem.rho0, problem.sigma0, ref, methods, cfg.grids, cfg.effective_workers());
  return SweepSession{std::move(problem), std::move(ref), std::move(constants),
                      std::move(records)};
}

std::string format_number(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

std::string sweep_csv(const std::vector<SweepRecord>& records) {
  std::string out = "order,N,h,norm_e,norm_f,bound,max_Enn,sum_Enn_h\n";
  for (const auto& r : records) {
    out += std::to_string(r.order) + ',' + std::to_string(r.n_grid) + ',' + format_number(r.h) +
           ',' + format_number(r.norm_e) + ',' + format_number(r.norm_f) + ',' +
           format_number(r.bound) + ',' + format_number(r.max_e_nn) + ',' +
           format_number(r.sum_e_nn_h) + '\n';
  }
  return out;
}

std::string bound_csv(const std::vector<SweepRecord>& records) {
  std::string out = "order,N,h,norm_e,bound,term_init,term_E,term_T2overN\n";
  for (const auto& r : records) {
    out += std::to_string(r.order) + ',' + std::to_string(r.n_grid) + ',' + format_number(r.h) +
           ',' + format_number(r.norm_e) + ',' + format_number(r.bound) + ',' +
           format_number(r.terms.init) + ',' + format_number(r.terms.e_term) + ',' +
           format_number(r.terms.t2_term) + '\n';
  }
  return out;
}

std::string trace_csv(const twoqubit::Proposition1Report& report, int stride) {
  std::string out = "t,V,fidelity,u1,purity\n";
  const std::size_t n = report.samples.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (j % static_cast<std::size_t>(stride) != 0 && j + 1 != n) continue;
    const auto& s = report.samples[j];
    out += format_number(s.t) + ',' + format_number(s.v) + ',' + format_number(s.fidelity) + ',' +
           format_number(s.u1) + ',' + format_number(s.purity) + '\n';
  }
  return out;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

twoqubit::Proposition1Report run_trace(const RunConfig& cfg, const Problem& problem) {
  if (!problem.setup) throw ConfigError("trace: only available for system = twoqubit");
  const ComplexMatrix start =
      cfg.trace_start == "target" ? problem.setup->target.matrix() : problem.rho0.matrix();
  return twoqubit::proposition1_trace(*problem.setup, start, cfg.t_long, cfg.trace_steps,
                                      cfg.v_threshold);
}

VerifyOutcome run_verify(const RunConfig& cfg, std::ostream& log) {
  VerifyOutcome out;
  std::ostringstream os;
  auto add = [&](CheckReport r) {
    append(os, r);
    log << status(r) << ' ' << r.name << '\n';
    if (!r.pass && out.first_failure.empty()) out.first_failure = r.name;
    out.items.push_back(std::move(r));
  };
  auto finish = [&]() {
    if (out.pass()) {
      os << "RESULT: PASS\n";
    } else {
      os << "RESULT: FAIL (first failing item: " << out.first_failure << ")\n";
    }
    out.text = os.str();
    return out;
  };

  CheckReport tab;
  tab.name = "tableau";
  for (const auto& m : cfg.methods()) {
    try {
      m.validate();
      tab.note("order " + std::to_string(m.order) + ": " + std::to_string(m.stages) +
               " stages, consistent");
    } catch (const std::invalid_argument& e) {
      tab.fail("order " + std::to_string(m.order) + ": " + e.what());
    }
  }
  add(tab);
  if (!tab.pass) return finish();

  SweepSession s = run_sweep(cfg, log);
  const VerifyThresholds& th = cfg.thresholds;

  CheckReport refrep;
  refrep.name = "reference";
  refrep.note("n_ref = " + std::to_string(s.ref.n_ref()) + ", validation error " +
              format_number(s.ref.validation_error()) + " (tolerance " +
              format_number(cfg.tol_ref) + ")");
  add(refrep);

  add(invariants_check(s.records, s.ref, s.problem.rho0, cfg.seed, th));
  add(theorem1_check(s.records, th));
  const Theorem2Limit limit = theorem2_limit(s.ref, s.problem.sigma0.matrix(), s.problem.sys);
  add(theorem2_check(s.records, limit, cfg.horizon, th));
  add(theorem3_check(s.records));
  add(appendix_identity_checks(s.ref, s.problem.sys, cfg.seed, th, cfg.appendix_times,
                               cfg.appendix_pairs));

  CheckReport prop;
  prop.name = "proposition1";
  if (!s.problem.setup) {
    prop.applicable = false;
    prop.note("only defined for the built-in two-qubit system");
  } else {
    const auto rep = run_trace(cfg, s.problem);
    const auto& first = rep.samples.front();
    prop.note("V(0) = " + format_number(first.v) + ", u1(0) = " + format_number(first.u1));
    prop.note("max V increase per step " + format_number(rep.max_v_increase));
    prop.note("max off-support entry " + format_number(rep.max_off_support));
    prop.note("purity drift " + format_number(rep.purity_drift));
    prop.note("V(" + format_number(cfg.t_long) + ") = " + format_number(rep.final_v) +
              " (threshold " + format_number(cfg.v_threshold) + ")");
    if (!rep.pass()) prop.fail(rep.first_violation);
  }
  add(prop);
  return finish();
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  return guarded(log, [&] {
    const SweepSession s = run_sweep(cfg, log);
    const auto path = out_file(cfg, "sweep.csv");
    write_atomically(path, sweep_csv(s.records));
    log << "wrote " << path.string() << " (" << s.records.size() << " rows)\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_trace(const RunConfig& cfg, std::ostream& log) {
  return guarded(log, [&] {
    const Problem problem = build_problem(cfg);
    const auto rep = run_trace(cfg, problem);
    const auto path = out_file(cfg, "trace.csv");
    write_atomically(path, trace_csv(rep, cfg.trace_stride));
    log << "wrote " << path.string() << '\n';
    if (rep.max_v_increase > rep.step_tol) {
      log << "FAIL: V increased by " << format_number(rep.max_v_increase) << '\n';
      return static_cast<int>(kExitVerifyFail);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_verify(const RunConfig& cfg, std::ostream& log) {
  return guarded(log, [&] {
    const VerifyOutcome v = run_verify(cfg, log);
    write_atomically(out_file(cfg, "verify.txt"), v.text);
    log << v.text;
    return static_cast<int>(v.pass() ? kExitOk : kExitVerifyFail);
  });
}

int cmd_bound(const RunConfig& cfg, std::ostream& log) {
  return guarded(log, [&] {
    const SweepSession s = run_sweep(cfg, log);
    const auto path = out_file(cfg, "bound.csv");
    write_atomically(path, bound_csv(s.records));
    log << "wrote " << path.string() << '\n';
    int code = kExitOk;
    for (const auto& r : s.records) {
      if (!(r.norm_e <= r.bound)) {
        log << "FAIL: order " << r.order << ", N=" << r.n_grid << ": norm_e "
            << format_number(r.norm_e) << " > bound " << format_number(r.bound) << '\n';
        code = kExitVerifyFail;
      }
    }
    return code;
  });
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  if (name == "sweep") return cmd_sweep(cfg, log);
  if (name == "trace") return cmd_trace(cfg, log);
  if (name == "verify") return cmd_verify(cfg, log);
  if (name == "bound") return cmd_bound(cfg, log);
  log << "unknown command '" << name << "'\n";
  return kExitConfig;
}

}  // namespace clol
