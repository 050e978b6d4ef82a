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

// Fixed-step explicit Runge-Kutta integration of matrix-valued ODEs.

#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clol/control_model.hpp"
#include "clol/linalg.hpp"

namespace clol {

struct ButcherTableau {
  int order = 0;
  int stages = 0;
  /// Row-major stages x stages, strictly lower triangular.
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<double> c;

  /// Throws std::invalid_argument if sum(b) != 1, c_i != sum_j a_ij, the
  /// method is not explicit, or the shapes disagree (tolerance 1e-14).
  void validate() const;
};

/// RK1 forward Euler, RK2 Heun, RK3 Kutta, RK4 classical, RK5 Butcher's
/// six-stage method. Throws std::out_of_range for other orders.
const ButcherTableau& tableau(int order);

using MatrixRhs = std::function<ComplexMatrix(const ComplexMatrix&)>;

/// One explicit step y + h sum_i b_i k_i.
ComplexMatrix rk_step(const ButcherTableau& tab, const MatrixRhs& f, const ComplexMatrix& y,
                      double h);

/// Grid solution theta_0..theta_N of the closed loop on t_n = nT/N.
struct ThetaSequence {
  int n_grid = 0;
  double horizon = 0.0;
  double step = 0.0;
  std::vector<ComplexMatrix> points;
};

/// Thrown when an integrator produces a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Simulates the closed loop from rho0 with N steps of the given tableau.
/// Each step is re-symmetrised to its Hermitian part; no positivity
/// projection is applied.
ThetaSequence step1_simulate(const BilinearSystem& sys, const DensityMatrix& rho0, double horizon,
                             int n_grid, const ButcherTableau& tab);
ThetaSequence step1_simulate(const BilinearSystem& sys, const DensityMatrix& rho0, double horizon,
                             int n_grid, int order);

}  // namespace clol
