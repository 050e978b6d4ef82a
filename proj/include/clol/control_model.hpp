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

// Bilinear feedback model rho' = -i[H0 + sum_k u_k(rho) H_k, rho].

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "clol/linalg.hpp"

namespace clol {

/// Real-valued feedback law u(rho). Affine laws u(rho) = tr(m rho) + c are
/// built in; arbitrary laws can be supplied together with their gradient in
/// the real coordinate chart (see CoordinateVector).
class FeedbackProtocol {
 public:
  using ValueFn = std::function<double(const ComplexMatrix&)>;
  using GradientFn = std::function<CoordinateVector(const ComplexMatrix&)>;

  /// m must be Hermitian.
  static FeedbackProtocol affine(ComplexMatrix m, double c = 0.0);
  static FeedbackProtocol constant(Eigen::Index dim, double c);
  static FeedbackProtocol user_supplied(Eigen::Index dim, ValueFn value, GradientFn gradient);

  bool is_affine() const { return affine_; }
  Eigen::Index dim() const { return dim_; }
  /// Only meaningful for affine protocols.
  const ComplexMatrix& affine_matrix() const { return m_; }
  double affine_offset() const { return c_; }

  double value(const ComplexMatrix& rho) const;
  /// Partial derivatives of u in the real coordinate chart, at rho.
  CoordinateVector gradient(const ComplexMatrix& rho) const;

 private:
  FeedbackProtocol() = default;

  bool affine_ = true;
  Eigen::Index dim_ = 0;
  ComplexMatrix m_;
  double c_ = 0.0;
  ValueFn value_;
  GradientFn gradient_;
};

/// H0 with Hermitian control Hamiltonians H_1..H_M and one protocol per control.
class BilinearSystem {
 public:
  /// Throws std::invalid_argument if any invariant fails.
  BilinearSystem(ComplexMatrix h0, std::vector<ComplexMatrix> controls,
                 std::vector<FeedbackProtocol> protocols);

  Eigen::Index dim() const { return h0_.rows(); }
  std::size_t num_controls() const { return controls_.size(); }
  const ComplexMatrix& drift() const { return h0_; }
  const std::vector<ComplexMatrix>& controls() const { return controls_; }
  const ComplexMatrix& control(std::size_t k) const { return controls_.at(k); }
  const std::vector<FeedbackProtocol>& protocols() const { return protocols_; }
  const FeedbackProtocol& protocol(std::size_t k) const { return protocols_.at(k); }

 private:
  ComplexMatrix h0_;
  std::vector<ComplexMatrix> controls_;
  std::vector<FeedbackProtocol> protocols_;
};

/// Matrix of partial derivatives arranged so that du/dt = tr(D rho').
struct DerivativeMatrix {
  ComplexMatrix d;
};

double protocol_value(const FeedbackProtocol& p, const ComplexMatrix& rho);

/// Diagonal: du/drho_ii (i < N), last diagonal entry 0. Off-diagonal (j < k):
/// (du/drho^R_jk + i du/drho^I_jk) / 2, and its conjugate at (k, j).
DerivativeMatrix derivative_matrix(const FeedbackProtocol& p, const ComplexMatrix& rho);

/// Control values u_k(rho), k = 1..M.
std::vector<double> control_values(const BilinearSystem& sys, const ComplexMatrix& rho);

/// H0 + sum_k amplitudes[k] H_k.
ComplexMatrix hamiltonian_with(const BilinearSystem& sys, std::span<const double> amplitudes);

/// H0 + sum_k u_k(rho) H_k.
ComplexMatrix total_hamiltonian(const BilinearSystem& sys, const ComplexMatrix& rho);

/// -i [H(rho), rho].
ComplexMatrix closed_loop_rhs(const BilinearSystem& sys, const ComplexMatrix& rho);

/// d/dt u(rho(t)) along the closed-loop flow through rho: tr(D (-i)[H(rho), rho]).
double protocol_time_derivative(const BilinearSystem& sys, const FeedbackProtocol& p,
                                const ComplexMatrix& rho);

/// Hilbert-Schmidt norm of the derivative matrix, maximised over states.
/// Exact for affine protocols (D is constant). For user-supplied protocols
/// the maximum is taken over `samples`, which only gives a lower estimate.
double l1_constant(const FeedbackProtocol& p, std::span<const ComplexMatrix> samples = {});

/// Upper bound on |u(rho)| over all density matrices: ||m|| + |c| for affine
/// protocols (Cauchy-Schwarz with ||rho|| <= 1).
double l0_cap(const FeedbackProtocol& p);

}  // namespace clol
