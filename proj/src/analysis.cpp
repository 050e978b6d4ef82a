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

#include "clol/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "clol/integrators.hpp"

namespace clol {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::map<int, std::vector<SweepRecord>> by_order(const std::vector<SweepRecord>& records) {
  std::map<int, std::vector<SweepRecord>> out;
  for (const auto& r : records) out[r.order].push_back(r);
  for (auto& [order, rs] : out) {
    std::sort(rs.begin(), rs.end(),
              [](const SweepRecord& a, const SweepRecord& b) { return a.n_grid < b.n_grid; });
  }
  return out;
}

// Slope of max_n ||E(N,n)|| against N, or nullopt-like NaN when fewer than
// three values sit above the noise floor.
double hamiltonian_error_slope(const std::vector<SweepRecord>& rs, double floor) {
  try {
    return slope_fit(rs, SweepField::MaxEnn, floor);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// True when every max_e_nn value above the floor is nonincreasing in N.
bool above_floor_nonincreasing(const std::vector<SweepRecord>& rs, double floor) {
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : rs) {
    if (r.max_e_nn < floor) continue;
    if (r.max_e_nn > prev) return false;
    prev = r.max_e_nn;
  }
  return true;
}

// Whether the assumed decay rate of max_n ||E(N,n)|| holds; appends a note.
bool hamiltonian_error_hypothesis(const std::vector<SweepRecord>& rs, double required,
                                  double floor, CheckReport& rep, int order) {
  const double slope = hamiltonian_error_slope(rs, floor);
  if (std::isnan(slope)) {
    const bool ok = above_floor_nonincreasing(rs, floor);
    rep.note("order " + std::to_string(order) + ": max_n ||E(N,n)|| below noise floor " +
             fmt(floor) + " on most grids" + (ok ? "" : " and not decreasing"));
    return ok;
  }
  rep.note("order " + std::to_string(order) + ": slope of max_n ||E(N,n)|| = " + fmt(slope) +
           " (required <= " + fmt(required) + ")");
  return slope <= required;
}

}  // namespace

BoundConstants bound_constants(const BilinearSystem& sys, const ReferenceTrajectory& ref) {
  BoundConstants c;
  for (std::size_t k = 0; k < sys.num_controls(); ++k) {
    const auto& p = sys.protocol(k);
    c.l0.push_back(l0_estimate(ref, k));
    std::vector<ComplexMatrix> samples;
    if (!p.is_affine()) {
      for (int j = 0; j <= ref.n_ref(); j += std::max(1, ref.n_ref() / 256)) {
        samples.push_back(ref.state(static_cast<std::size_t>(j)));
      }
    }
    c.l1.push_back(l1_constant(p, samples));
    c.l0_cap.push_back(p.is_affine() ? l0_cap(p) : std::numeric_limits<double>::quiet_NaN());
  }
  return c;
}

double t2_coefficient(const BilinearSystem& sys, const BoundConstants& c) {
  double h_norm = hs_norm(sys.drift());
  for (std::size_t j = 0; j < sys.num_controls(); ++j) {
    h_norm += c.l0[j] * hs_norm(sys.control(j));
  }
  double coeff = 0.0;
  for (std::size_t k = 0; k < sys.num_controls(); ++k) {
    coeff += c.l1[k] * h_norm * hs_norm(sys.control(k));
  }
  return 2.0 * coeff;
}

BoundTerms theorem3_bound(const BilinearSystem& sys, int n_grid, double horizon,
                          double sum_e_nn_h, double init_norm, const BoundConstants& c) {
  BoundTerms t;
  t.init = init_norm;
  t.e_term = 2.0 * sum_e_nn_h;
  t.t2_term = t2_coefficient(sys, c) * horizon * horizon / n_grid;
  return t;
}

SweepRecord run_pipeline(const BilinearSystem& sys, const DensityMatrix& rho0,
                         const DensityMatrix& sigma0, const ReferenceTrajectory& ref,
                         const ButcherTableau& tab, int n_grid, const BoundConstants& c) {
  const double horizon = ref.horizon();
  // Fail on misaligned grids before doing any work.
  (void)ref.coarse_index(0, n_grid);

  const ThetaSequence theta = step1_simulate(sys, rho0, horizon, n_grid, tab);
  const PiecewiseControl ctrl = step2_generate_controls(theta, sys);
  const OpenLoopTrajectory sigma = step3_propagate(sigma0, sys, ctrl);

  SweepRecord r;
  r.order = tab.order;
  r.n_grid = n_grid;
  r.h = horizon / n_grid;
  for (std::size_t n = 0; n < static_cast<std::size_t>(n_grid); ++n) {
    const double e = hs_norm(hamiltonian_error(ref, ctrl, sys, n));
    r.max_e_nn = std::max(r.max_e_nn, e);
    r.sum_e_nn_h += e * r.h;
  }
  r.norm_e = hs_norm(error_e(ref, sigma, horizon));
  r.f = error_f(ref, sigma, rho0, sigma0);
  r.norm_f = hs_norm(r.f);
  r.terms = theorem3_bound(sys, n_grid, horizon, r.sum_e_nn_h,
                           hs_norm(rho0.matrix() - sigma0.matrix()), c);
  r.bound = r.terms.total();

  for (const auto& u : sigma.interval_unitaries) {
    r.max_unitarity_defect = std::max(r.max_unitarity_defect, unitarity_defect(u));
  }
  const double trace0 = sigma0.matrix().trace().real();
  const double purity0 = sigma0.purity();
  for (const auto& s : sigma.states) {
    r.trace_drift = std::max(r.trace_drift, std::abs(s.trace() - Complex(trace0)));
    r.hermiticity_drift = std::max(r.hermiticity_drift, hermiticity_defect(s));
    r.purity_drift = std::max(r.purity_drift, std::abs((s * s).trace().real() - purity0));
  }
  for (std::size_t n = 0; n < theta.points.size(); ++n) {
    const std::size_t j = ref.coarse_index(n, n_grid);
    r.max_theta_error = std::max(r.max_theta_error, hs_norm(theta.points[n] - ref.state(j)));
  }
  return r;
}

std::vector<SweepRecord> convergence_sweep(const BilinearSystem& sys, const DensityMatrix& rho0,
                                           const DensityMatrix& sigma0,
                                           const ReferenceTrajectory& ref,
                                           const std::vector<int>& orders,
                                           const std::vector<int>& grids, unsigned workers) {
  std::vector<ButcherTableau> methods;
  for (int o : orders) methods.push_back(tableau(o));
  return convergence_sweep(sys, rho0, sigma0, ref, methods, grids, workers);
}

std::vector<SweepRecord> convergence_sweep(const BilinearSystem& sys, const DensityMatrix& rho0,
                                           const DensityMatrix& sigma0,
                                           const ReferenceTrajectory& ref,
                                           const std::vector<ButcherTableau>& methods,
                                           const std::vector<int>& grids, unsigned workers) {
  std::vector<ButcherTableau> ms = methods;
  std::sort(ms.begin(), ms.end(),
            [](const ButcherTableau& a, const ButcherTableau& b) { return a.order < b.order; });
  ms.erase(std::unique(ms.begin(), ms.end(),
                       [](const ButcherTableau& a, const ButcherTableau& b) {
                         return a.order == b.order;
                       }),
           ms.end());
  std::vector<int> ns = grids;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t m = 0; m < ms.size(); ++m) {
    ms[m].validate();
    for (int n : ns) {
      (void)ref.coarse_index(0, n);
      jobs.emplace_back(m, n);
    }
  }

  const BoundConstants c = bound_constants(sys, ref);
  std::vector<SweepRecord> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = run_pipeline(sys, rho0, sigma0, ref, ms[jobs[i].first], jobs[i].second, c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

double field_value(const SweepRecord& r, SweepField field) {
  switch (field) {
    case SweepField::NormF:
      return r.norm_f;
    case SweepField::NormE:
      return r.norm_e;
    case SweepField::MaxEnn:
      return r.max_e_nn;
  }
  return 0.0;
}

double slope_fit(const std::vector<double>& x, const std::vector<double>& y, double noise_floor) {
  if (x.size() != y.size()) throw std::invalid_argument("slope_fit: length mismatch");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && y[i] >= noise_floor) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 3) {
    throw std::invalid_argument("slope_fit: fewer than 3 points above the noise floor");
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope_fit: x values are all equal");
  return sxy / sxx;
}

double slope_fit(const std::vector<SweepRecord>& records, SweepField field, double noise_floor) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : records) {
    x.push_back(r.n_grid);
    y.push_back(field_value(r, field));
  }
  return slope_fit(x, y, noise_floor);
}

Theorem2Limit theorem2_limit(const ReferenceTrajectory& ref, const ComplexMatrix& sigma0,
                             const BilinearSystem& sys) {
  const int n = ref.n_ref();
  if (n < 2 || n % 2 != 0) {
    throw std::invalid_argument("theorem2_limit: reference grid must have an even step count");
  }
  const Eigen::Index d = ref.dim();
  const double h = ref.step();

  // U[T,s](X) = U_T W_s^dagger X W_s U_T^dagger with W_s = U[s,0]; the outer
  // conjugation by U_T is applied once after summing.
  ComplexMatrix fine = ComplexMatrix::Zero(d, d);
  ComplexMatrix coarse = ComplexMatrix::Zero(d, d);
  ComplexMatrix w = ComplexMatrix::Identity(d, d);
  for (int j = 0; j <= n; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const ComplexMatrix rho = ref.state(js);
    ComplexMatrix hdot = ComplexMatrix::Zero(d, d);
    for (std::size_t k = 0; k < sys.num_controls(); ++k) {
      hdot += protocol_time_derivative(sys, sys.protocol(k), rho) * sys.control(k);
    }
    const ComplexMatrix pulled = w.adjoint() * hdot * w;
    const ComplexMatrix integrand = -kI * commutator(pulled, sigma0);
    const double end_weight = (j == 0 || j == n) ? 0.5 : 1.0;
    fine += (end_weight * h) * integrand;
    if (j % 2 == 0) coarse += (end_weight * 2.0 * h) * integrand;
    if (j < n) w = ref.step_unitary(js) * w;
  }
  const ComplexMatrix& ut = ref.full_propagator();
  Theorem2Limit out;
  out.limit = 0.5 * conjugate_by(ut, fine);
  out.quadrature_n = n;
  out.est_error = hs_norm(out.limit - 0.5 * conjugate_by(ut, coarse));
  const double scale = std::max(1.0, hs_norm(out.limit));
  if (out.est_error > 1e-6 * scale) {
    throw std::runtime_error("theorem2_limit: quadrature did not converge (estimate " +
                             fmt(out.est_error) + ")");
  }
  return out;
}

void CheckReport::fail(const std::string& why) {
  if (pass) failure = why;
  pass = false;
  details.push_back("FAIL: " + why);
}

CheckReport theorem1_check(const std::vector<SweepRecord>& records, const VerifyThresholds& th) {
  CheckReport rep;
  rep.name = "theorem1";
  for (const auto& [order, rs] : by_order(records)) {
    const std::string tag = "order " + std::to_string(order);
    if (rs.size() < 3) {
      rep.fail(tag + ": need at least 3 grid sizes");
      continue;
    }
    std::ostringstream seq;
    for (const auto& r : rs) seq << ' ' << fmt(r.norm_f);
    rep.note(tag + ": ||F(N,T)|| =" + seq.str());
    for (std::size_t i = 0; i + 1 < rs.size(); ++i) {
      if (rs[i + 1].norm_f > th.noise_floor &&
          rs[i + 1].norm_f > (1.0 + th.jitter) * rs[i].norm_f) {
        rep.fail(tag + ": ||F|| rose from N=" + std::to_string(rs[i].n_grid) + " to N=" +
                 std::to_string(rs[i + 1].n_grid));
      }
    }
    if (rs.back().norm_f > th.noise_floor &&
        rs.back().norm_f > rs.front().norm_f / th.decrease_factor) {
      rep.fail(tag + ": ||F(" + std::to_string(rs.back().n_grid) + ")|| = " +
               fmt(rs.back().norm_f) + " exceeds ||F(" + std::to_string(rs.front().n_grid) +
               ")|| / " + fmt(th.decrease_factor));
    }
    if (th.eps_pass > 0.0 && rs.back().norm_f > th.eps_pass) {
      rep.fail(tag + ": final ||F|| = " + fmt(rs.back().norm_f) + " above eps_pass " +
               fmt(th.eps_pass));
    }
    const double required = order == 1 ? th.rk1_e_slope : th.high_order_e_slope;
    if (!hamiltonian_error_hypothesis(rs, required, th.noise_floor, rep, order)) {
      rep.fail(tag + ": Hamiltonian error does not decay at the assumed rate");
    }
  }
  if (records.empty()) rep.fail("no sweep records");
  return rep;
}

CheckReport theorem2_check(const std::vector<SweepRecord>& records, const Theorem2Limit& limit,
                           double horizon, const VerifyThresholds& th) {
  CheckReport rep;
  rep.name = "theorem2";
  const double norm_l = hs_norm(limit.limit);
  rep.note("||L|| = " + fmt(norm_l) + " (quadrature n = " + std::to_string(limit.quadrature_n) +
           ", estimated error " + fmt(limit.est_error) + ")");
  if (norm_l <= th.vacuous_limit) {
    rep.applicable = false;
    rep.note("limit vanishes; rate checks are vacuous");
    return rep;
  }
  const auto groups = by_order(records);
  bool any = false;
  for (const auto& [order, rs] : groups) {
    if (order < 2) continue;
    const std::string tag = "order " + std::to_string(order);
    if (!hamiltonian_error_hypothesis(rs, th.high_order_e_slope, th.noise_floor, rep, order)) {
      rep.note(tag + ": O(h^2) Hamiltonian-error hypothesis not met, skipped");
      continue;
    }
    any = true;
    std::vector<SweepRecord> tail;
    for (const auto& r : rs) {
      if (r.n_grid >= th.rate_min_n) tail.push_back(r);
    }
    try {
      const double slope = slope_fit(tail, SweepField::NormF, th.noise_floor);
      rep.note(tag + ": slope of ||F(N,T)|| = " + fmt(slope));
      if (slope < th.rate_lo || slope > th.rate_hi) {
        rep.fail(tag + ": rate " + fmt(slope) + " outside [" + fmt(th.rate_lo) + ", " +
                 fmt(th.rate_hi) + "]");
      }
    } catch (const std::invalid_argument& e) {
      rep.fail(tag + ": " + e.what());
    }
    const SweepRecord& last = rs.back();
    const double dev = hs_norm(last.f * (last.n_grid / horizon) - limit.limit) / norm_l;
    rep.note(tag + ": ||(N/T)F - L|| / ||L|| at N=" + std::to_string(last.n_grid) + " = " +
             fmt(dev));
    if (dev > th.limit_deviation) {
      rep.fail(tag + ": (N/T)F deviates from L by " + fmt(dev) + " (limit " +
               fmt(th.limit_deviation) + ")");
    }
  }
  if (!any) {
    rep.applicable = false;
    rep.note("no order >= 2 satisfies the hypothesis");
    return rep;
  }

  for (std::size_t a = 0; a < th.overlap_orders.size(); ++a) {
    for (std::size_t b = a + 1; b < th.overlap_orders.size(); ++b) {
      const auto ia = groups.find(th.overlap_orders[a]);
      const auto ib = groups.find(th.overlap_orders[b]);
      if (ia == groups.end() || ib == groups.end()) continue;
      double worst = 0.0;
      for (const auto& ra : ia->second) {
        if (ra.n_grid < th.overlap_min_n) continue;
        for (const auto& rb : ib->second) {
          if (rb.n_grid != ra.n_grid) continue;
          const double scale = std::max(ra.norm_f, rb.norm_f);
          const double rel = scale > 0.0 ? std::abs(ra.norm_f - rb.norm_f) / scale : 0.0;
          worst = std::max(worst, rel);
        }
      }
      rep.note("orders " + std::to_string(th.overlap_orders[a]) + "/" +
               std::to_string(th.overlap_orders[b]) + ": max relative ||F|| gap = " + fmt(worst));
      if (worst > th.overlap) {
        rep.fail("orders " + std::to_string(th.overlap_orders[a]) + " and " +
                 std::to_string(th.overlap_orders[b]) + " differ by " + fmt(worst));
      }
    }
  }
  return rep;
}

CheckReport theorem3_check(const std::vector<SweepRecord>& records) {
  CheckReport rep;
  rep.name = "theorem3";
  double worst_ratio = 0.0;
  std::map<int, double> t2_by_n;
  for (const auto& r : records) {
    worst_ratio = std::max(worst_ratio, r.norm_e / r.bound);
    if (!(r.norm_e <= r.bound)) {
      rep.fail("order " + std::to_string(r.order) + ", N=" + std::to_string(r.n_grid) +
               ": ||e_N(T)|| = " + fmt(r.norm_e) + " exceeds bound " + fmt(r.bound));
    }
    const auto [it, inserted] = t2_by_n.emplace(r.n_grid, r.terms.t2_term);
    if (!inserted && it->second != r.terms.t2_term) {
      rep.fail("T^2/N term differs across methods at N=" + std::to_string(r.n_grid));
    }
  }
  rep.note("max ||e_N(T)|| / bound = " + fmt(worst_ratio) + " over " +
           std::to_string(records.size()) + " records");
  return rep;
}

CheckReport invariants_check(const std::vector<SweepRecord>& records,
                             const ReferenceTrajectory& ref, const DensityMatrix& rho0,
                             std::uint64_t seed, const VerifyThresholds& th, int samples) {
  CheckReport rep;
  rep.name = "invariants";
  double open_unitarity = 0.0;
  double open_trace = 0.0;
  double open_herm = 0.0;
  double open_purity = 0.0;
  for (const auto& r : records) {
    open_unitarity = std::max(open_unitarity, r.max_unitarity_defect);
    open_trace = std::max(open_trace, r.trace_drift);
    open_herm = std::max(open_herm, r.hermiticity_drift);
    open_purity = std::max(open_purity, r.purity_drift);
  }

  double step_unitarity = 0.0;
  double ref_trace = 0.0;
  double ref_purity = 0.0;
  const double purity0 = rho0.purity();
  const auto n = static_cast<std::size_t>(ref.n_ref());
  for (std::size_t j = 0; j <= n; ++j) {
    if (j < n) step_unitarity = std::max(step_unitarity, unitarity_defect(ref.step_unitary(j)));
    const ComplexMatrix s = ref.state(j);
    ref_trace = std::max(ref_trace, std::abs(s.trace() - Complex(1.0)));
    ref_purity = std::max(ref_purity, std::abs((s * s).trace().real() - purity0));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n);
  double prop_unitarity = unitarity_defect(ref.full_propagator());
  double norm_defect = 0.0;
  for (int i = 0; i < samples; ++i) {
    std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    if (a > b) std::swap(a, b);
    const ComplexMatrix u = propagator_between(ref, b, a);
    prop_unitarity = std::max(prop_unitarity, unitarity_defect(u));
    const ComplexMatrix x = random_hermitian(ref.dim(), rng);
    const double nx = hs_norm(x);
    norm_defect = std::max(norm_defect, std::abs(hs_norm(conjugate_by(u, x)) - nx) / nx);
  }

  auto gate = [&](const std::string& what, double value, double tol) {
    rep.note(what + " = " + fmt(value) + " (tolerance " + fmt(tol) + ")");
    if (!(value <= tol)) rep.fail(what + " " + fmt(value) + " exceeds " + fmt(tol));
  };
  gate("max interval unitarity defect", open_unitarity, th.unitarity_tol);
  gate("max reference step unitarity defect", step_unitarity, th.unitarity_tol);
  gate("max propagator unitarity defect", prop_unitarity, th.unitarity_tol);
  gate("max relative norm change under U[t,s]", norm_defect, th.unitarity_tol);
  gate("open-loop trace drift", open_trace, th.open_loop_tol);
  gate("open-loop hermiticity drift", open_herm, th.open_loop_tol);
  gate("open-loop purity drift", open_purity, th.open_loop_tol);
  gate("reference trace drift", ref_trace, th.reference_trace_tol);
  gate("reference purity drift", ref_purity, th.reference_purity_tol);
  return rep;
}

CheckReport appendix_identity_checks(const ReferenceTrajectory& ref, const BilinearSystem& sys,
                                     std::uint64_t seed, const VerifyThresholds& th, int times,
                                     int pairs, AppendixResiduals* out) {
  CheckReport rep;
  rep.name = "appendix";
  std::mt19937_64 rng(seed);
  const Eigen::Index d = sys.dim();
  const int n = ref.n_ref();
  AppendixResiduals res;

  // Identity A.
  const int delta = std::max(1, n / 4096);
  const double h = ref.step();
  const ComplexMatrix a0 = random_hermitian(d, rng);
  const ComplexMatrix a1 = random_hermitian(d, rng);
  const ComplexMatrix a2 = random_hermitian(d, rng);
  auto a_at = [&](double s) -> ComplexMatrix { return a0 + s * a1 + (s * s) * a2; };
  auto a_dot = [&](double s) -> ComplexMatrix { return a1 + (2.0 * s) * a2; };

  std::vector<int> centres;
  for (int i = 1; i <= times; ++i) {
    const int j = static_cast<int>(std::lround(static_cast<double>(i) * n / (times + 1)));
    if (j - delta >= 0 && j + delta <= n) centres.push_back(j);
  }
  std::map<int, ComplexMatrix> w_at;
  for (int j : centres) {
    w_at.emplace(j - delta, ComplexMatrix());
    w_at.emplace(j, ComplexMatrix());
    w_at.emplace(j + delta, ComplexMatrix());
  }
  {
    ComplexMatrix w = ComplexMatrix::Identity(d, d);
    int j = 0;
    for (auto& [idx, slot] : w_at) {
      for (; j < idx; ++j) w = ref.step_unitary(static_cast<std::size_t>(j)) * w;
      slot = w;
    }
  }
  const ComplexMatrix& ut = ref.full_propagator();
  auto pull_back = [&](int j, const ComplexMatrix& x) {
    const ComplexMatrix& w = w_at.at(j);
    return conjugate_by(ut, w.adjoint() * x * w);
  };
  for (int j : centres) {
    const double s = j * h;
    const double ds = delta * h;
    const ComplexMatrix lhs =
        (pull_back(j + delta, a_at(s + ds)) - pull_back(j - delta, a_at(s - ds))) / (2.0 * ds);
    const ComplexMatrix hs = ref.hamiltonian(sys, static_cast<std::size_t>(j));
    const ComplexMatrix rhs = pull_back(j, kI * commutator(hs, a_at(s)) + a_dot(s));
    const double scale = hs_norm(rhs);
    const double r = scale > 0.0 ? hs_norm(lhs - rhs) / scale : hs_norm(lhs - rhs);
    res.propagator_derivative = std::max(res.propagator_derivative, r);
  }
  rep.note("propagator-derivative identity: max relative residual " +
           fmt(res.propagator_derivative) + " over " + std::to_string(centres.size()) +
           " times (tolerance " + fmt(th.appendix_a_tol) + ")");
  if (res.propagator_derivative > th.appendix_a_tol) {
    rep.fail("propagator-derivative identity residual " + fmt(res.propagator_derivative));
  }

  // Identity B.
  constexpr double kEps = 1e-5;
  for (int i = 0; i < pairs; ++i) {
    const ComplexMatrix rho = random_density_matrix(d, rng);
    std::normal_distribution<double> normal;
    const FeedbackProtocol p = FeedbackProtocol::affine(random_hermitian(d, rng), normal(rng));
    const double direct = protocol_time_derivative(sys, p, rho);

    const ComplexMatrix rhs = closed_loop_rhs(sys, rho);
    const std::vector<double> x = to_coords(rho).flatten();
    const std::vector<double> xdot = to_coords(rhs).flatten();
    double chain = 0.0;
    for (std::size_t q = 0; q < x.size(); ++q) {
      std::vector<double> up = x;
      std::vector<double> down = x;
      up[q] += kEps;
      down[q] -= kEps;
      const double du = (p.value(from_coords(CoordinateVector::unflatten(up, d))) -
                         p.value(from_coords(CoordinateVector::unflatten(down, d)))) /
                        (2.0 * kEps);
      chain += du * xdot[q];
    }
    const double scale = hs_norm(derivative_matrix(p, rho).d) * hs_norm(rhs);
    const double r = scale > 0.0 ? std::abs(direct - chain) / scale : std::abs(direct - chain);
    res.chain_rule = std::max(res.chain_rule, r);
  }
  rep.note("chain-rule identity: max relative residual " + fmt(res.chain_rule) + " over " +
           std::to_string(pairs) + " pairs (tolerance " + fmt(th.appendix_b_tol) + ")");
  if (res.chain_rule > th.appendix_b_tol) {
    rep.fail("chain-rule identity residual " + fmt(res.chain_rule));
  }
  if (out) *out = res;
  return rep;
}

}  // namespace clol
