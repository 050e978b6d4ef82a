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

#include "clol/two_qubit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clol/integrators.hpp"

namespace clol::twoqubit {

ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return m;
}

ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

namespace {

Eigen::VectorXcd qubit(int bit) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(2);
  v(bit == 1 ? 0 : 1) = 1.0;
  return v;
}

Eigen::VectorXcd two_qubit_ket(int a, int b) {
  return kron(qubit(a), qubit(b));
}

}  // namespace

ComplexMatrix basis_projector(int a, int b) {
  const Eigen::VectorXcd v = two_qubit_ket(a, b);
  return v * v.adjoint();
}

ComplexMatrix drift_hamiltonian() {
  const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
  return kron(pauli_z(), id) + kron(id, pauli_z());
}

ComplexMatrix control_hamiltonian() {
  return kron(pauli_x(), pauli_y()) - kron(pauli_y(), pauli_x());
}

ComplexMatrix target_state() {
  const Eigen::VectorXcd phi = (two_qubit_ket(1, 0) + two_qubit_ket(0, 1)) / std::sqrt(2.0);
  return phi * phi.adjoint();
}

BilinearSystem make_system(double gain) {
  const ComplexMatrix h1 = control_hamiltonian();
  ComplexMatrix m = -gain * kI * commutator(target_state(), h1);
  return BilinearSystem(drift_hamiltonian(), {h1},
                        {FeedbackProtocol::affine(hermitian_part(m))});
}

Setup default_setup(double gain, double horizon) {
  return Setup{make_system(gain),
               DensityMatrix(target_state()),
               DensityMatrix(basis_projector(1, 0)),
               DensityMatrix(0.95 * basis_projector(1, 0) + 0.05 * basis_projector(0, 0)),
               gain,
               horizon};
}

double lyapunov_v(const Setup& setup, const ComplexMatrix& rho) {
  return 1.0 - fidelity_to_target(setup, rho);
}

double fidelity_to_target(const Setup& setup, const ComplexMatrix& rho) {
  return (setup.target.matrix() * rho).trace().real();
}

double lyapunov_rate(const Setup& setup, const ComplexMatrix& rho) {
  const double s =
      (kI * commutator(setup.target.matrix(), setup.sys.control(0)) * rho).trace().real();
  return -setup.gain * s * s;
}

Proposition1Report proposition1_trace(const Setup& setup, const ComplexMatrix& start,
                                      double t_long, int n_steps, double v_threshold) {
  const ThetaSequence traj =
      step1_simulate(setup.sys, DensityMatrix(start), t_long, n_steps, tableau(5));
  Proposition1Report rep;
  rep.v_threshold = v_threshold;
  const double purity0 = (start * start).trace().real();

  auto flag = [&rep](bool bad, double t, const std::string& what) {
    if (bad && rep.first_violation.empty()) {
      std::ostringstream os;
      os << what << " at t=" << t;
      rep.first_violation = os.str();
    }
  };

  double prev_v = 0.0;
  for (std::size_t j = 0; j < traj.points.size(); ++j) {
    const ComplexMatrix& rho = traj.points[j];
    const double t = static_cast<double>(j) * traj.step;
    TraceSample s{t, lyapunov_v(setup, rho), fidelity_to_target(setup, rho),
                  setup.sys.protocol(0).value(rho), (rho * rho).trace().real()};
    if (j > 0) {
      const double rise = s.v - prev_v;
      rep.max_v_increase = std::max(rep.max_v_increase, rise);
      flag(rise > rep.step_tol, t, "V increased by " + std::to_string(rise));
    }
    prev_v = s.v;

    const double pop = std::max(std::abs(rho(k11, k11)), std::abs(rho(k00, k00)));
    rep.max_population = std::max(rep.max_population, pop);
    flag(pop > rep.step_tol, t, "invariant population left zero");

    double off = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
      off = std::max({off, std::abs(rho(k11, i)), std::abs(rho(i, k11)), std::abs(rho(k00, i)),
                      std::abs(rho(i, k00))});
    }
    rep.max_off_support = std::max(rep.max_off_support, off);
    flag(off > rep.support_tol, t, "support left span{|10>,|01>}");

    const double drift = std::abs(s.purity - purity0);
    rep.purity_drift = std::max(rep.purity_drift, drift);
    flag(drift > rep.step_tol, t, "purity drifted by " + std::to_string(drift));

    rep.samples.push_back(s);
  }
  rep.final_v = rep.samples.back().v;
  flag(rep.final_v > v_threshold, t_long,
       "final V " + std::to_string(rep.final_v) + " above threshold");
  return rep;
}

}  // namespace clol::twoqubit
