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

#include "clol/integrators.hpp"

#include <cmath>

namespace clol {

namespace {

constexpr double kTableauTol = 1e-14;

ButcherTableau make_euler() { return {1, 1, {{0.0}}, {1.0}, {0.0}}; }

ButcherTableau make_heun() {
  return {2, 2, {{0.0, 0.0}, {1.0, 0.0}}, {0.5, 0.5}, {0.0, 1.0}};
}

ButcherTableau make_kutta3() {
  return {3,
          3,
          {{0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}, {-1.0, 2.0, 0.0}},
          {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
          {0.0, 0.5, 1.0}};
}

ButcherTableau make_classical4() {
  return {4,
          4,
          {{0.0, 0.0, 0.0, 0.0}, {0.5, 0.0, 0.0, 0.0}, {0.0, 0.5, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}},
          {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0},
          {0.0, 0.5, 0.5, 1.0}};
}

ButcherTableau make_butcher5() {
  return {5,
          6,
          {{0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
           {0.25, 0.0, 0.0, 0.0, 0.0, 0.0},
           {0.125, 0.125, 0.0, 0.0, 0.0, 0.0},
           {0.0, -0.5, 1.0, 0.0, 0.0, 0.0},
           {3.0 / 16.0, 0.0, 0.0, 9.0 / 16.0, 0.0, 0.0},
           {-3.0 / 7.0, 2.0 / 7.0, 12.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0, 0.0}},
          {7.0 / 90.0, 0.0, 32.0 / 90.0, 12.0 / 90.0, 32.0 / 90.0, 7.0 / 90.0},
          {0.0, 0.25, 0.25, 0.5, 0.75, 1.0}};
}

}  // namespace

void ButcherTableau::validate() const {
  const auto s = static_cast<std::size_t>(stages);
  if (stages < 1 || a.size() != s || b.size() != s || c.size() != s) {
    throw std::invalid_argument("ButcherTableau: inconsistent stage count");
  }
  double bsum = 0.0;
  for (double w : b) bsum += w;
  if (std::abs(bsum - 1.0) > kTableauTol) {
    throw std::invalid_argument("ButcherTableau: weights do not sum to 1");
  }
  for (std::size_t i = 0; i < s; ++i) {
    if (a[i].size() != s) throw std::invalid_argument("ButcherTableau: a is not square");
    double row = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      if (j >= i && a[i][j] != 0.0) {
        throw std::invalid_argument("ButcherTableau: not explicit");
      }
      row += a[i][j];
    }
    if (std::abs(row - c[i]) > kTableauTol) {
      throw std::invalid_argument("ButcherTableau: row-sum condition violated");
    }
  }
}

const ButcherTableau& tableau(int order) {
  static const ButcherTableau kTableaux[] = {make_euler(), make_heun(), make_kutta3(),
                                             make_classical4(), make_butcher5()};
  if (order < 1 || order > 5) {
    throw std::out_of_range("tableau: unsupported order " + std::to_string(order));
  }
  return kTableaux[order - 1];
}

ComplexMatrix rk_step(const ButcherTableau& tab, const MatrixRhs& f, const ComplexMatrix& y,
                      double h) {
  const auto s = static_cast<std::size_t>(tab.stages);
  std::vector<ComplexMatrix> k;
  k.reserve(s);
  for (std::size_t i = 0; i < s; ++i) {
    ComplexMatrix yi = y;
    for (std::size_t j = 0; j < i; ++j) {
      if (tab.a[i][j] != 0.0) yi += (h * tab.a[i][j]) * k[j];
    }
    k.push_back(f(yi));
  }
  ComplexMatrix out = y;
  for (std::size_t i = 0; i < s; ++i) {
    if (tab.b[i] != 0.0) out += (h * tab.b[i]) * k[i];
  }
  return out;
}

ThetaSequence step1_simulate(const BilinearSystem& sys, const DensityMatrix& rho0, double horizon,
                             int n_grid, const ButcherTableau& tab) {
  if (!(horizon > 0.0)) throw std::invalid_argument("step1_simulate: horizon must be positive");
  if (n_grid < 1) throw std::invalid_argument("step1_simulate: need N >= 1");
  if (rho0.dim() != sys.dim()) throw std::invalid_argument("step1_simulate: dimension mismatch");
  tab.validate();

  ThetaSequence out;
  out.n_grid = n_grid;
  out.horizon = horizon;
  out.step = horizon / n_grid;
  out.points.reserve(static_cast<std::size_t>(n_grid) + 1);
  out.points.push_back(rho0.matrix());

  const MatrixRhs f = [&sys](const ComplexMatrix& y) { return closed_loop_rhs(sys, y); };
  for (int n = 0; n < n_grid; ++n) {
    ComplexMatrix next = hermitian_part(rk_step(tab, f, out.points.back(), out.step));
    if (!next.allFinite()) {
      throw DivergenceError("step1_simulate: non-finite state at step " + std::to_string(n + 1),
                            static_cast<std::size_t>(n + 1));
    }
    out.points.push_back(std::move(next));
  }
  return out;
}

ThetaSequence step1_simulate(const BilinearSystem& sys, const DensityMatrix& rho0, double horizon,
                             int n_grid, int order) {
  return step1_simulate(sys, rho0, horizon, n_grid, tableau(order));
}

}  // namespace clol
