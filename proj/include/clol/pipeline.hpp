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

// Pulse generation from a simulated closed loop, open-loop propagation of
// the plant, the reference closed-loop trajectory with its propagator, and
// the error quantities comparing the two.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "clol/control_model.hpp"
#include "clol/integrators.hpp"
#include "clol/linalg.hpp"

namespace clol {

/// Time query that does not land on the required grid.
class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reference trajectory whose self-consistency check exceeded its tolerance.
class ReferenceValidationError : public std::runtime_error {
 public:
  ReferenceValidationError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

/// Control amplitudes held constant on each [t_n, t_{n+1}).
struct PiecewiseControl {
  int n_grid = 0;
  double horizon = 0.0;
  std::size_t num_controls = 0;
  /// Row-major n_grid x num_controls.
  std::vector<double> values;

  double value(std::size_t n, std::size_t k) const { return values[n * num_controls + k]; }
  std::span<const double> row(std::size_t n) const {
    return {values.data() + n * num_controls, num_controls};
  }
};

/// values[n][k] = u_k(theta_n) for n = 0..N-1.
PiecewiseControl step2_generate_controls(const ThetaSequence& theta, const BilinearSystem& sys);

/// Plant trajectory sigma_N(t_n), n = 0..N, and the exact interval
/// unitaries exp(-i h H_N^n) that produced it.
struct OpenLoopTrajectory {
  double horizon = 0.0;
  std::vector<ComplexMatrix> states;
  std::vector<ComplexMatrix> interval_unitaries;

  int n_grid() const { return static_cast<int>(interval_unitaries.size()); }
};

OpenLoopTrajectory step3_propagate(const DensityMatrix& sigma0, const BilinearSystem& sys,
                                   const PiecewiseControl& ctrl);

/// Sequence of equally sized square matrices in one contiguous buffer.
class MatrixSeries {
 public:
  MatrixSeries() = default;
  MatrixSeries(Eigen::Index dim, std::size_t count)
      : dim_(dim), data_(static_cast<std::size_t>(dim * dim) * count) {}

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / static_cast<std::size_t>(dim_ * dim_); }
  Eigen::Map<const ComplexMatrix> operator[](std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(dim_ * dim_), dim_, dim_};
  }
  Eigen::Map<ComplexMatrix> operator[](std::size_t i) {
    return {data_.data() + i * static_cast<std::size_t>(dim_ * dim_), dim_, dim_};
  }

 private:
  Eigen::Index dim_ = 0;
  std::vector<Complex> data_;
};

struct ReferenceOptions {
  /// Number of reference steps on [0, T].
  int n_ref = 0;
  /// Accepted max-norm difference between the reference and a run at half
  /// the resolution, sampled on the coarser grid.
  double tol_ref = 1e-9;
  bool validate = true;
};

/// Dense high-accuracy closed-loop solution rho(t; rho0, 0) on t_j = jT/n_ref,
/// the controls g_k(t_j) = u_k(rho(t_j)), and per-step unitaries
/// exp(-i h H(t_j + h/2)) whose products give the propagator of
/// omega' = -i[H_{rho0}(t), omega].
class ReferenceTrajectory {
 public:
  /// States come from RK5 at half the reference step (the odd half-steps
  /// supply the midpoint Hamiltonians). Throws ReferenceValidationError if
  /// validation is on and a run at n_ref / 2 steps differs by more than
  /// tol_ref.
  static ReferenceTrajectory build(const BilinearSystem& sys, const DensityMatrix& rho0,
                                   double horizon, const ReferenceOptions& opts);

  int n_ref() const { return n_ref_; }
  double horizon() const { return horizon_; }
  double step() const { return horizon_ / n_ref_; }
  Eigen::Index dim() const { return dim_; }
  std::size_t num_controls() const { return num_controls_; }
  double validation_error() const { return validation_error_; }

  ComplexMatrix state(std::size_t j) const { return states_[j]; }
  double control(std::size_t j, std::size_t k) const { return controls_[j * num_controls_ + k]; }
  std::span<const double> controls_at(std::size_t j) const {
    return {controls_.data() + j * num_controls_, num_controls_};
  }
  /// exp(-i h H(t_j + h/2)), j = 0..n_ref-1.
  ComplexMatrix step_unitary(std::size_t j) const { return unitaries_[j]; }
  /// H_{rho0}(t_j) = H0 + sum_k g_k(t_j) H_k.
  ComplexMatrix hamiltonian(const BilinearSystem& sys, std::size_t j) const;
  /// step_unitary(to-1) ... step_unitary(from), multiplied pairwise.
  ComplexMatrix product(std::size_t from, std::size_t to) const;
  /// U[T, 0].
  const ComplexMatrix& full_propagator() const { return full_; }

  /// Reference index of time t. Throws GridError if t is off-grid.
  std::size_t grid_index(double t) const;
  /// Reference index of t_n = nT/N. Throws GridError unless N divides n_ref.
  std::size_t coarse_index(std::size_t n, int n_grid) const;

 private:
  int n_ref_ = 0;
  double horizon_ = 0.0;
  Eigen::Index dim_ = 0;
  std::size_t num_controls_ = 0;
  double validation_error_ = 0.0;
  MatrixSeries states_;
  MatrixSeries unitaries_;
  std::vector<double> controls_;
  ComplexMatrix full_;
};

ReferenceTrajectory reference_trajectory(const BilinearSystem& sys, const DensityMatrix& rho0,
                                         double horizon, int n_ref, double tol_ref = 1e-9);

/// Unitary U with U[t,s](A) = U A U^dagger.
struct Propagator {
  ComplexMatrix u;
  double from_time = 0.0;
  double to_time = 0.0;

  ComplexMatrix apply(const ComplexMatrix& a) const { return conjugate_by(u, a); }
};

/// U[t, s] for grid times s <= t. Throws GridError for off-grid or
/// reversed times.
Propagator propagator(const ReferenceTrajectory& ref, double t, double s);
/// Index form: product of step unitaries from index `from` up to `to`.
ComplexMatrix propagator_between(const ReferenceTrajectory& ref, std::size_t to, std::size_t from);

/// E(N, n) = sum_k (g_k(t_n) - u~_k(t_n)) H_k.
ComplexMatrix hamiltonian_error(const ReferenceTrajectory& ref, const PiecewiseControl& ctrl,
                                const BilinearSystem& sys, std::size_t n);

/// e_N(t) = rho(t) - sigma_N(t) at a time on both grids.
ComplexMatrix error_e(const ReferenceTrajectory& ref, const OpenLoopTrajectory& sigma, double t);

/// F(N, T) = e_N(T) - U[T,0](rho0 - sigma0).
ComplexMatrix error_f(const ReferenceTrajectory& ref, const OpenLoopTrajectory& sigma,
                      const ComplexMatrix& rho0, const ComplexMatrix& sigma0);

/// max_j |g_k(t_j)| over the reference samples.
double l0_estimate(const ReferenceTrajectory& ref, std::size_t k);
/// max_j |u(rho(t_j))| for an arbitrary protocol.
double l0_estimate(const FeedbackProtocol& p, const ReferenceTrajectory& ref);

}  // namespace clol
