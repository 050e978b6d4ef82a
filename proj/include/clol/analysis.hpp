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

// Convergence sweeps over (method, grid) pairs and the numerical checks
// built on them: first-order convergence of F(N,T), the 1/N limit
// integral, the a-priori error bound, and the two propagator/chain-rule
// identities used in the error analysis.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clol/control_model.hpp"
#include "clol/integrators.hpp"
#include "clol/linalg.hpp"
#include "clol/pipeline.hpp"

namespace clol {

/// Three terms of the error bound
///   ||e_N(T)|| <= ||rho0 - sigma0|| + 2 sum_n ||E(N,n)|| T/N
///               + 2 sum_k L1_k (||H0|| + sum_j L0_j ||H_j||) ||H_k|| T^2/N.
struct BoundTerms {
  double init = 0.0;
  double e_term = 0.0;
  double t2_term = 0.0;

  double total() const { return init + e_term + t2_term; }
};

/// Per-protocol constants entering the third bound term.
struct BoundConstants {
  std::vector<double> l0;
  std::vector<double> l1;
  /// Cauchy-Schwarz caps on L0 (reported only).
  std::vector<double> l0_cap;
};

/// L0 from the reference samples, L1 in closed form (affine protocols).
BoundConstants bound_constants(const BilinearSystem& sys, const ReferenceTrajectory& ref);

/// 2 sum_k L1_k (||H0|| + sum_j L0_j ||H_j||) ||H_k||: the method-independent
/// coefficient of T^2/N.
double t2_coefficient(const BilinearSystem& sys, const BoundConstants& c);

BoundTerms theorem3_bound(const BilinearSystem& sys, int n_grid, double horizon,
                          double sum_e_nn_h, double init_norm, const BoundConstants& c);

struct SweepRecord {
  int order = 0;
  int n_grid = 0;
  double h = 0.0;
  double norm_e = 0.0;
  double norm_f = 0.0;
  double bound = 0.0;
  double max_e_nn = 0.0;
  double sum_e_nn_h = 0.0;
  BoundTerms terms;
  ComplexMatrix f;
  /// max hs_norm(U^dagger U - I) over the interval unitaries.
  double max_unitarity_defect = 0.0;
  /// Max drift of trace, Hermiticity defect and purity of sigma_N over the grid.
  double trace_drift = 0.0;
  double hermiticity_drift = 0.0;
  double purity_drift = 0.0;
  /// max_n ||theta_n - rho(t_n)||.
  double max_theta_error = 0.0;
};

/// Runs Steps 1-3 for one (order, N) and evaluates every error quantity.
SweepRecord run_pipeline(const BilinearSystem& sys, const DensityMatrix& rho0,
                         const DensityMatrix& sigma0, const ReferenceTrajectory& ref,
                         const ButcherTableau& tab, int n_grid, const BoundConstants& c);

/// One record per (order, N), sorted by order then N. Runs on up to
/// `workers` threads; results do not depend on the worker count.
std::vector<SweepRecord> convergence_sweep(const BilinearSystem& sys, const DensityMatrix& rho0,
                                           const DensityMatrix& sigma0,
                                           const ReferenceTrajectory& ref,
                                           const std::vector<int>& orders,
                                           const std::vector<int>& grids, unsigned workers = 1);
/// Same with explicit tableaux (each is validated before any run starts).
std::vector<SweepRecord> convergence_sweep(const BilinearSystem& sys, const DensityMatrix& rho0,
                                           const DensityMatrix& sigma0,
                                           const ReferenceTrajectory& ref,
                                           const std::vector<ButcherTableau>& methods,
                                           const std::vector<int>& grids, unsigned workers = 1);

enum class SweepField { NormF, NormE, MaxEnn };

double field_value(const SweepRecord& r, SweepField field);

/// Least-squares slope of log(y) against log(x), skipping points with
/// y < noise_floor. Throws std::invalid_argument with fewer than 3 points.
double slope_fit(const std::vector<double>& x, const std::vector<double>& y,
                 double noise_floor = 0.0);
/// Same, over records of a single order with x = N.
double slope_fit(const std::vector<SweepRecord>& records, SweepField field,
                 double noise_floor = 0.0);

/// Right-hand side of the 1/N limit
///   (1/2) int_0^T U[T,s](-i[dH/ds(s), sigma(s)]) ds,  sigma(s) = U[s,0](sigma0),
/// by composite trapezoid on the reference grid.
struct Theorem2Limit {
  ComplexMatrix limit;
  int quadrature_n = 0;
  /// ||L(n_ref) - L(n_ref / 2)||.
  double est_error = 0.0;
};

/// Throws std::runtime_error if est_error > 1e-6 max(1, ||L||).
Theorem2Limit theorem2_limit(const ReferenceTrajectory& ref, const ComplexMatrix& sigma0,
                             const BilinearSystem& sys);

struct VerifyThresholds {
  double jitter = 0.05;
  double decrease_factor = 16.0;
  /// Upper limit on ||F(N_max, T)||; <= 0 disables the check.
  double eps_pass = 0.0;
  double rk1_e_slope = -0.9;
  double high_order_e_slope = -1.8;
  double rate_lo = -1.4;
  double rate_hi = -0.6;
  int rate_min_n = 256;
  double limit_deviation = 0.10;
  double overlap = 0.05;
  int overlap_min_n = 512;
  std::vector<int> overlap_orders{3, 4, 5};
  double noise_floor = 1e-8;
  double vacuous_limit = 1e-8;
  double appendix_a_tol = 1e-5;
  double appendix_b_tol = 1e-8;
  double unitarity_tol = 1e-10;
  double open_loop_tol = 1e-11;
  double reference_trace_tol = 1e-10;
  double reference_purity_tol = 1e-9;
};

struct CheckReport {
  std::string name;
  bool pass = true;
  bool applicable = true;
  std::vector<std::string> details;
  std::string failure;

  void fail(const std::string& why);
  void note(const std::string& line) { details.push_back(line); }
};

/// F(N,T) decreases over the grid sequence for each order and ends below
/// F(N_min)/decrease_factor (and eps_pass when set); values at or below the
/// noise floor count as converged. The Hamiltonian error
/// max_n ||E(N,n)|| decays at least like the assumed rate.
CheckReport theorem1_check(const std::vector<SweepRecord>& records, const VerifyThresholds& th);

/// First-order rate of F for orders >= 2, agreement of (N/T) F(N,T) with the
/// limit, and cross-method overlap. Vacuous when ||L|| <= vacuous_limit.
CheckReport theorem2_check(const std::vector<SweepRecord>& records, const Theorem2Limit& limit,
                           double horizon, const VerifyThresholds& th);

/// norm_e <= bound on every record and the T^2/N term identical across orders.
CheckReport theorem3_check(const std::vector<SweepRecord>& records);

/// Unitarity of every interval and reference step unitary and of sampled
/// propagators U[t,s], norm preservation of their superoperator action,
/// and conservation of trace, Hermiticity and purity along sigma_N and the
/// reference.
CheckReport invariants_check(const std::vector<SweepRecord>& records,
                             const ReferenceTrajectory& ref, const DensityMatrix& rho0,
                             std::uint64_t seed, const VerifyThresholds& th, int samples = 32);

struct AppendixResiduals {
  double propagator_derivative = 0.0;  // max relative residual, identity A
  double chain_rule = 0.0;             // max relative residual, identity B
};

/// Identity A: d/ds U[T,s](A(s)) = U[T,s](i[H(s), A(s)] + A'(s)) for
/// quadratic Hermitian A(s), by central differences at `times` interior
/// grid times. Identity B: tr(D (-i)[H(rho), rho]) equals the coordinate
/// chain rule with finite-difference partials, on `pairs` random
/// (state, affine protocol) pairs.
CheckReport appendix_identity_checks(const ReferenceTrajectory& ref, const BilinearSystem& sys,
                                     std::uint64_t seed, const VerifyThresholds& th,
                                     int times = 16, int pairs = 50,
                                     AppendixResiduals* out = nullptr);

/// Random density matrix G G^dagger / tr(G G^dagger) with Gaussian G.
template <typename Rng>
ComplexMatrix random_density_matrix(Eigen::Index dim, Rng& rng);
/// Random Hermitian matrix with Gaussian entries.
template <typename Rng>
ComplexMatrix random_hermitian(Eigen::Index dim, Rng& rng);

}  // namespace clol

#include "clol/random_matrices.ipp"
