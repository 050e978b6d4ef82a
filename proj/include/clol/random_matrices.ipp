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

#pragma once

#include <random>

namespace clol {

template <typename Rng>
ComplexMatrix random_hermitian(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal;
  ComplexMatrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = Complex(normal(rng), normal(rng));
  }
  return hermitian_part(g);
}

template <typename Rng>
ComplexMatrix random_density_matrix(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal;
  ComplexMatrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = Complex(normal(rng), normal(rng));
  }
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return hermitian_part(rho);
}

}  // namespace clol
