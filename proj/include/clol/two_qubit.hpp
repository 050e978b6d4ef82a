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

// Two-qubit Bell-state preparation: H0 = Z(x)I + I(x)Z, H1 = X(x)Y - Y(x)X,
// u1(rho) = -K tr(i[rho_d, H1] rho), target rho_d = |Phi><Phi| with
// |Phi> = (|10> + |01>)/sqrt(2).
//
// Basis order is (|11>, |10>, |01>, |00>) with |1> = (1,0)^T, |0> = (0,1)^T,
// which is plain Kronecker ordering under that single-qubit convention.

#pragma once

#include <string>
#include <vector>

#include "clol/control_model.hpp"
#include "clol/linalg.hpp"

namespace clol::twoqubit {

inline constexpr Eigen::Index k11 = 0;
inline constexpr Eigen::Index k10 = 1;
inline constexpr Eigen::Index k01 = 2;
inline constexpr Eigen::Index k00 = 3;

ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// |ab><ab| for a, b in {0, 1}.
ComplexMatrix basis_projector(int a, int b);

ComplexMatrix drift_hamiltonian();
ComplexMatrix control_hamiltonian();
/// rho_d = |Phi><Phi|.
ComplexMatrix target_state();

struct Setup {
  BilinearSystem sys;
  DensityMatrix target;
  DensityMatrix rho0;
  DensityMatrix sigma0;
  double gain;
  double horizon;
};

/// The feedback system with gain K (u1 = tr(m rho), m = -K i[rho_d, H1]).
BilinearSystem make_system(double gain);

/// K = 1, T = 1, rho0 = |10><10|, sigma0 = 0.95|10><10| + 0.05|00><00|.
Setup default_setup(double gain = 1.0, double horizon = 1.0);

/// V(rho) = tr((I - rho_d) rho).
double lyapunov_v(const Setup& setup, const ComplexMatrix& rho);
/// tr(rho_d rho).
double fidelity_to_target(const Setup& setup, const ComplexMatrix& rho);
/// dV/dt in closed form: -K (tr(i[rho_d, H1] rho))^2.
double lyapunov_rate(const Setup& setup, const ComplexMatrix& rho);

struct TraceSample {
  double t;
  double v;
  double fidelity;
  double u1;
  double purity;
};

struct Proposition1Report {
  std::vector<TraceSample> samples;
  double max_v_increase = 0.0;    // max_j V(t_{j+1}) - V(t_j)
  double max_population = 0.0;    // max <11|rho|11>, <00|rho|00>
  double max_off_support = 0.0;   // max |rho_ij| with i or j in {|11>, |00>}
  double purity_drift = 0.0;      // max |tr rho^2 - tr rho0^2|
  double final_v = 0.0;
  double step_tol = 1e-9;
  double support_tol = 1e-8;
  double v_threshold = 0.01;
  /// Empty when every check passed; otherwise the first violation with its time.
  std::string first_violation;

  bool pass() const { return first_violation.empty(); }
};

/// Integrates the closed loop from `start` over [0, t_long] with n steps of
/// RK5 and checks the Lyapunov decrease, the invariance of the |11>, |00>
/// populations, purity conservation and the final value of V.
Proposition1Report proposition1_trace(const Setup& setup, const ComplexMatrix& start,
                                      double t_long, int n_steps, double v_threshold = 0.01);

}  // namespace clol::twoqubit
