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

#include "clol/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace clol {

namespace {

constexpr double kGridTol = 1e-9;

std::size_t locate_on_grid(double t, double horizon, int count, const char* who) {
  const double x = t / horizon * count;
  const double j = std::round(x);
  if (!std::isfinite(x) || std::abs(x - j) > kGridTol || j < 0.0 || j > count) {
    throw GridError(std::string(who) + ": time " + std::to_string(t) + " is not on the grid");
  }
  return static_cast<std::size_t>(j);
}

}  // namespace

PiecewiseControl step2_generate_controls(const ThetaSequence& theta, const BilinearSystem& sys) {
  if (theta.points.size() != static_cast<std::size_t>(theta.n_grid) + 1) {
    throw std::invalid_argument("step2_generate_controls: malformed theta sequence");
  }
  PiecewiseControl ctrl;
  ctrl.n_grid = theta.n_grid;
  ctrl.horizon = theta.horizon;
  ctrl.num_controls = sys.num_controls();
  ctrl.values.reserve(static_cast<std::size_t>(theta.n_grid) * ctrl.num_controls);
  // theta_N is not used: the last interval is [t_{N-1}, T].
  for (int n = 0; n < theta.n_grid; ++n) {
    for (const auto& p : sys.protocols()) {
      ctrl.values.push_back(p.value(theta.points[static_cast<std::size_t>(n)]));
    }
  }
  return ctrl;
}

OpenLoopTrajectory step3_propagate(const DensityMatrix& sigma0, const BilinearSystem& sys,
                                   const PiecewiseControl& ctrl) {
  if (sigma0.dim() != sys.dim()) throw std::invalid_argument("step3_propagate: dimension mismatch");
  if (ctrl.num_controls != sys.num_controls()) {
    throw std::invalid_argument("step3_propagate: control count mismatch");
  }
  const double h = ctrl.horizon / ctrl.n_grid;
  OpenLoopTrajectory out;
  out.horizon = ctrl.horizon;
  out.states.reserve(static_cast<std::size_t>(ctrl.n_grid) + 1);
  out.interval_unitaries.reserve(static_cast<std::size_t>(ctrl.n_grid));
  out.states.push_back(sigma0.matrix());
  for (std::size_t n = 0; n < static_cast<std::size_t>(ctrl.n_grid); ++n) {
    ComplexMatrix u = unitary_exp(hamiltonian_with(sys, ctrl.row(n)), h);
    out.states.push_back(conjugate_by(u, out.states.back()));
    out.interval_unitaries.push_back(std::move(u));
  }
  return out;
}


namespace {

// One Newton-Schulz step towards the nearest unitary.
ComplexMatrix polar_correct(const ComplexMatrix& u) {
  const auto d = u.rows();
  return u * (3.0 * ComplexMatrix::Identity(d, d) - u.adjoint() * u) * 0.5;
}

// Pairwise product step[to-1] * ... * step[from], with each partial product
// pulled back onto the unitary group.
ComplexMatrix ordered_product(const MatrixSeries& steps, Eigen::Index dim, std::size_t from,
                              std::size_t to) {
  std::vector<std::pair<ComplexMatrix, std::size_t>> stack;
  for (std::size_t j = from; j < to; ++j) {
    stack.emplace_back(steps[j], 1);
    while (stack.size() >= 2 && stack[stack.size() - 1].second == stack[stack.size() - 2].second) {
      auto later = std::move(stack.back());
      stack.pop_back();
      stack.back().first = polar_correct(later.first * stack.back().first);
      stack.back().second += later.second;
    }
  }
  ComplexMatrix u = ComplexMatrix::Identity(dim, dim);
  for (const auto& [m, count] : stack) u = polar_correct(m * u);
  return u;
}

}  // namespace

ComplexMatrix ReferenceTrajectory::product(std::size_t from, std::size_t to) const {
  return ordered_product(unitaries_, dim_, from, to);
}

ReferenceTrajectory ReferenceTrajectory::build(const BilinearSystem& sys,
                                               const DensityMatrix& rho0, double horizon,
                                               const ReferenceOptions& opts) {
  if (!(horizon > 0.0)) throw std::invalid_argument("ReferenceTrajectory: horizon must be positive");
  if (opts.n_ref < 1) throw std::invalid_argument("ReferenceTrajectory: need n_ref >= 1");
  if (rho0.dim() != sys.dim()) throw std::invalid_argument("ReferenceTrajectory: dimension mismatch");

  const auto n = static_cast<std::size_t>(opts.n_ref);
  const Eigen::Index d = sys.dim();
  const std::size_t m = sys.num_controls();
  const double h = horizon / opts.n_ref;
  const ButcherTableau& rk5 = tableau(5);
  const MatrixRhs f = [&sys](const ComplexMatrix& y) { return closed_loop_rhs(sys, y); };

  ReferenceTrajectory ref;
  ref.n_ref_ = opts.n_ref;
  ref.horizon_ = horizon;
  ref.dim_ = d;
  ref.num_controls_ = m;
  ref.states_ = MatrixSeries(d, n + 1);
  ref.unitaries_ = MatrixSeries(d, n);
  ref.controls_.resize((n + 1) * m);

  auto record = [&](std::size_t j, const ComplexMatrix& y) {
    ref.states_[j] = y;
    for (std::size_t k = 0; k < m; ++k) ref.controls_[j * m + k] = sys.protocol(k).value(y);
  };
  auto advance = [&](const ComplexMatrix& y, double step, std::size_t j) {
    ComplexMatrix next = hermitian_part(rk_step(rk5, f, y, step));
    if (!next.allFinite()) {
      throw DivergenceError("ReferenceTrajectory: non-finite state at step " + std::to_string(j),
                            j);
    }
    return next;
  };

  ComplexMatrix y = rho0.matrix();
  for (std::size_t j = 0; j < n; ++j) {
    record(j, y);
    const ComplexMatrix mid = advance(y, 0.5 * h, j);
    ComplexMatrix u = unitary_exp(total_hamiltonian(sys, mid), h);
    ref.unitaries_[j] = u;
    y = advance(mid, 0.5 * h, j);
  }
  record(n, y);
  ref.full_ = ordered_product(ref.unitaries_, d, 0, n);

  if (opts.validate) {
    ComplexMatrix z = rho0.matrix();
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      z = advance(z, h, j);
      worst = std::max(worst, (z - ref.states_[j + 1]).cwiseAbs().maxCoeff());
    }
    ref.validation_error_ = worst;
    if (worst > opts.tol_ref) {
      throw ReferenceValidationError(
          "ReferenceTrajectory: self-consistency error " + std::to_string(worst) +
              " exceeds tolerance " + std::to_string(opts.tol_ref),
          worst);
    }
  }
  return ref;
}

ComplexMatrix ReferenceTrajectory::hamiltonian(const BilinearSystem& sys, std::size_t j) const {
  return hamiltonian_with(sys, controls_at(j));
}

std::size_t ReferenceTrajectory::grid_index(double t) const {
  return locate_on_grid(t, horizon_, n_ref_, "ReferenceTrajectory");
}

std::size_t ReferenceTrajectory::coarse_index(std::size_t n, int n_grid) const {
  if (n_grid < 1 || n_ref_ % n_grid != 0) {
    throw GridError("ReferenceTrajectory: grid of " + std::to_string(n_grid) +
                    " intervals does not nest in " + std::to_string(n_ref_));
  }
  if (n > static_cast<std::size_t>(n_grid)) throw GridError("ReferenceTrajectory: index past horizon");
  return n * static_cast<std::size_t>(n_ref_ / n_grid);
}

ReferenceTrajectory reference_trajectory(const BilinearSystem& sys, const DensityMatrix& rho0,
                                         double horizon, int n_ref, double tol_ref) {
  return ReferenceTrajectory::build(sys, rho0, horizon, {n_ref, tol_ref, true});
}

ComplexMatrix propagator_between(const ReferenceTrajectory& ref, std::size_t to, std::size_t from) {
  if (from > to || to > static_cast<std::size_t>(ref.n_ref())) {
    throw GridError("propagator: need 0 <= s <= t <= T");
  }
  if (from == 0 && to == static_cast<std::size_t>(ref.n_ref())) return ref.full_propagator();
  return ref.product(from, to);
}

Propagator propagator(const ReferenceTrajectory& ref, double t, double s) {
  const std::size_t jt = ref.grid_index(t);
  const std::size_t js = ref.grid_index(s);
  return {propagator_between(ref, jt, js), s, t};
}

ComplexMatrix hamiltonian_error(const ReferenceTrajectory& ref, const PiecewiseControl& ctrl,
                                const BilinearSystem& sys, std::size_t n) {
  if (n >= static_cast<std::size_t>(ctrl.n_grid)) {
    throw GridError("hamiltonian_error: interval index out of range");
  }
  if (std::abs(ctrl.horizon - ref.horizon()) > 1e-12 * ref.horizon()) {
    throw GridError("hamiltonian_error: horizons differ");
  }
  const std::size_t j = ref.coarse_index(n, ctrl.n_grid);
  ComplexMatrix e = ComplexMatrix::Zero(sys.dim(), sys.dim());
  for (std::size_t k = 0; k < sys.num_controls(); ++k) {
    e += (ref.control(j, k) - ctrl.value(n, k)) * sys.control(k);
  }
  return e;
}

ComplexMatrix error_e(const ReferenceTrajectory& ref, const OpenLoopTrajectory& sigma, double t) {
  if (std::abs(sigma.horizon - ref.horizon()) > 1e-12 * ref.horizon()) {
    throw GridError("error_e: horizons differ");
  }
  const std::size_t n = locate_on_grid(t, sigma.horizon, sigma.n_grid(), "error_e");
  const std::size_t j = ref.coarse_index(n, sigma.n_grid());
  return ref.state(j) - sigma.states[n];
}

ComplexMatrix error_f(const ReferenceTrajectory& ref, const OpenLoopTrajectory& sigma,
                      const ComplexMatrix& rho0, const ComplexMatrix& sigma0) {
  return error_e(ref, sigma, ref.horizon()) - conjugate_by(ref.full_propagator(), rho0 - sigma0);
}

double l0_estimate(const ReferenceTrajectory& ref, std::size_t k) {
  double best = 0.0;
  for (std::size_t j = 0; j <= static_cast<std::size_t>(ref.n_ref()); ++j) {
    best = std::max(best, std::abs(ref.control(j, k)));
  }
  return best;
}

double l0_estimate(const FeedbackProtocol& p, const ReferenceTrajectory& ref) {
  double best = 0.0;
  for (std::size_t j = 0; j <= static_cast<std::size_t>(ref.n_ref()); ++j) {
    best = std::max(best, std::abs(p.value(ref.state(j))));
  }
  return best;
}

}  // namespace clol
