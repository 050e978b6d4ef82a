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

#include "clol/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace clol {

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw std::invalid_argument("commutator: dimension mismatch");
  }
  return a * b - b * a;
}

double hs_norm(const ComplexMatrix& a) { return a.norm(); }

double hermiticity_defect(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const ComplexMatrix& a, double tol) {
  return hermiticity_defect(a) <= tol;
}

ComplexMatrix hermitian_part(const ComplexMatrix& a) {
  return 0.5 * (a + a.adjoint());
}

double unitarity_defect(const ComplexMatrix& u) {
  return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).norm();
}

ComplexMatrix unitary_exp(const ComplexMatrix& h, double t) {
  if (!is_hermitian(h)) {
    throw std::invalid_argument("unitary_exp: input is not Hermitian (defect " +
                                std::to_string(hermiticity_defect(h)) + ")");
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(hermitian_part(h));
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("unitary_exp: eigendecomposition failed");
  }
  const auto& v = eig.eigenvectors();
  Eigen::VectorXcd phases(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    phases(i) = std::polar(1.0, -eig.eigenvalues()(i) * t);
  }
  const ComplexMatrix u = v * phases.asDiagonal() * v.adjoint();
  // One Newton-Schulz step removes the first-order unitarity defect of v.
  const auto n = h.rows();
  return u * (3.0 * ComplexMatrix::Identity(n, n) - u.adjoint() * u) * 0.5;
}

ComplexMatrix conjugate_by(const ComplexMatrix& u, const ComplexMatrix& a) {
  return u * a * u.adjoint();
}

DensityMatrix::DensityMatrix(ComplexMatrix m, double psd_floor) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 2) {
    throw std::invalid_argument("DensityMatrix: must be square with dim >= 2");
  }
  if (!m_.allFinite()) throw std::invalid_argument("DensityMatrix: non-finite entry");
  if (!is_hermitian(m_)) throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(m_.trace() - Complex(1.0)) > kTraceTol) {
    throw std::invalid_argument("DensityMatrix: trace is not one");
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(hermitian_part(m_), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < psd_floor) {
    throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                std::to_string(eig.eigenvalues().minCoeff()));
  }
}

double DensityMatrix::purity() const { return (m_ * m_).trace().real(); }

std::vector<double> CoordinateVector::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  out.insert(out.end(), diag.begin(), diag.end());
  out.insert(out.end(), re.begin(), re.end());
  out.insert(out.end(), im.begin(), im.end());
  return out;
}

CoordinateVector CoordinateVector::unflatten(const std::vector<double>& flat, Eigen::Index dim) {
  if (flat.size() != coordinate_count(dim)) {
    throw std::invalid_argument("CoordinateVector::unflatten: wrong length");
  }
  const auto nd = static_cast<std::size_t>(dim - 1);
  const auto np = static_cast<std::size_t>(dim * (dim - 1) / 2);
  CoordinateVector c;
  c.diag.assign(flat.begin(), flat.begin() + nd);
  c.re.assign(flat.begin() + nd, flat.begin() + nd + np);
  c.im.assign(flat.begin() + nd + np, flat.end());
  return c;
}

std::size_t coordinate_count(Eigen::Index dim) {
  return static_cast<std::size_t>(dim * dim - 1);
}

CoordinateVector to_coords(const ComplexMatrix& rho) {
  const Eigen::Index n = rho.rows();
  CoordinateVector c;
  for (Eigen::Index i = 0; i + 1 < n; ++i) c.diag.push_back(rho(i, i).real());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      c.re.push_back(rho(i, j).real());
      c.im.push_back(rho(i, j).imag());
    }
  }
  return c;
}

ComplexMatrix from_coords(const CoordinateVector& c, double trace) {
  const auto n = static_cast<Eigen::Index>(c.diag.size() + 1);
  if (c.re.size() != static_cast<std::size_t>(n * (n - 1) / 2) || c.im.size() != c.re.size()) {
    throw std::invalid_argument("from_coords: inconsistent coordinate lengths");
  }
  ComplexMatrix rho = ComplexMatrix::Zero(n, n);
  double partial = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    rho(i, i) = c.diag[static_cast<std::size_t>(i)];
    partial += c.diag[static_cast<std::size_t>(i)];
  }
  rho(n - 1, n - 1) = trace - partial;
  std::size_t p = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j, ++p) {
      rho(i, j) = Complex(c.re[p], c.im[p]);
      rho(j, i) = Complex(c.re[p], -c.im[p]);
    }
  }
  return rho;
}

ComplexMatrix basis_operator(BasisKind kind, Eigen::Index j, Eigen::Index k, Eigen::Index dim) {
  const bool in_range = j >= 1 && k >= 1 && j <= dim && k <= dim;
  const bool shape_ok = kind == BasisKind::Omega ? j == k : j < k;
  if (!in_range || !shape_ok) {
    throw std::out_of_range("basis_operator: invalid index pair (" + std::to_string(j) + ", " +
                            std::to_string(k) + ") for dim " + std::to_string(dim));
  }
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  const Eigen::Index a = j - 1;
  const Eigen::Index b = k - 1;
  switch (kind) {
    case BasisKind::E:
      out(a, b) = 1.0;
      out(b, a) = 1.0;
      break;
    case BasisKind::F:
      out(a, b) = kI;
      out(b, a) = -kI;
      break;
    case BasisKind::Omega:
      out(a, a) = 1.0;
      break;
  }
  return out;
}

}  // namespace clol
