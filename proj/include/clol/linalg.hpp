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

// Dense complex matrix helpers at small fixed dimension, and the real
// coordinate chart on trace-one Hermitian matrices.

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace clol {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr Complex kI{0.0, 1.0};

/// Entrywise tolerance on |A - A^dagger| for a matrix to count as Hermitian.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
inline constexpr double kPsdFloor = -1e-10;

/// [a, b] = ab - ba. Throws std::invalid_argument on dimension mismatch.
ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);

/// Hilbert-Schmidt (Frobenius) norm sqrt(tr(A^dagger A)).
double hs_norm(const ComplexMatrix& a);

/// max_ij |A_ij - conj(A_ji)|.
double hermiticity_defect(const ComplexMatrix& a);
bool is_hermitian(const ComplexMatrix& a, double tol = kHermitianTol);

/// (A + A^dagger) / 2.
ComplexMatrix hermitian_part(const ComplexMatrix& a);

/// hs_norm(U^dagger U - I).
double unitarity_defect(const ComplexMatrix& u);

/// e^{-i h t} for Hermitian h, computed from the real spectral decomposition
/// of h so that the result is unitary to round-off. Throws
/// std::invalid_argument if h is not Hermitian within kHermitianTol.
ComplexMatrix unitary_exp(const ComplexMatrix& h, double t);

/// U A U^dagger.
ComplexMatrix conjugate_by(const ComplexMatrix& u, const ComplexMatrix& a);

/// Hermitian, trace-one, positive semidefinite matrix.
class DensityMatrix {
 public:
  /// Validates the invariants; throws std::invalid_argument on violation.
  explicit DensityMatrix(ComplexMatrix m, double psd_floor = kPsdFloor);

  const ComplexMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  double purity() const;

  operator const ComplexMatrix&() const { return m_; }

 private:
  ComplexMatrix m_;
};

/// Real coordinates of a Hermitian matrix in the basis
/// {Omega_ii (i < N)} u {E_ij, F_ij (i < j)}: the first N-1 diagonal entries,
/// then Re rho_ij and Im rho_ij for i < j in lexicographic order.
struct CoordinateVector {
  std::vector<double> diag;
  std::vector<double> re;
  std::vector<double> im;

  std::size_t size() const { return diag.size() + re.size() + im.size(); }

  /// Flat layout: diag, then re, then im.
  std::vector<double> flatten() const;
  static CoordinateVector unflatten(const std::vector<double>& flat, Eigen::Index dim);
};

/// Dimension of the chart for an N x N matrix: N^2 - 1.
std::size_t coordinate_count(Eigen::Index dim);

CoordinateVector to_coords(const ComplexMatrix& rho);

/// Reconstructs the Hermitian matrix whose trace equals `trace`; the last
/// diagonal entry is trace - sum(diag). No positivity check.
ComplexMatrix from_coords(const CoordinateVector& c, double trace = 1.0);

enum class BasisKind { E, F, Omega };

/// Chart basis operators with 1-based indices: E_jk = e_j e_k^T + e_k e_j^T,
/// F_jk = i e_j e_k^T - i e_k e_j^T (j < k), Omega_kk = e_k e_k^T (j == k).
/// Throws std::out_of_range for invalid indices.
ComplexMatrix basis_operator(BasisKind kind, Eigen::Index j, Eigen::Index k, Eigen::Index dim);

}  // namespace clol
