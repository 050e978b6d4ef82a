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

#include "clol/control_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clol {

FeedbackProtocol FeedbackProtocol::affine(ComplexMatrix m, double c) {
  if (m.rows() != m.cols() || !is_hermitian(m)) {
    throw std::invalid_argument("FeedbackProtocol::affine: m must be square Hermitian");
  }
  FeedbackProtocol p;
  p.affine_ = true;
  p.dim_ = m.rows();
  p.m_ = std::move(m);
  p.c_ = c;
  return p;
}

FeedbackProtocol FeedbackProtocol::constant(Eigen::Index dim, double c) {
  return affine(ComplexMatrix::Zero(dim, dim), c);
}

FeedbackProtocol FeedbackProtocol::user_supplied(Eigen::Index dim, ValueFn value,
                                                 GradientFn gradient) {
  if (!value || !gradient) {
    throw std::invalid_argument("FeedbackProtocol::user_supplied: missing callback");
  }
  FeedbackProtocol p;
  p.affine_ = false;
  p.dim_ = dim;
  p.value_ = std::move(value);
  p.gradient_ = std::move(gradient);
  return p;
}

double FeedbackProtocol::value(const ComplexMatrix& rho) const {
  if (!affine_) return value_(rho);
  // tr(m rho) without forming the product.
  return m_.cwiseProduct(rho.transpose()).sum().real() + c_;
}

CoordinateVector FeedbackProtocol::gradient(const ComplexMatrix& rho) const {
  if (!affine_) return gradient_(rho);
  // u = sum_i rho_ii m_ii + rho_NN m_NN + sum_{i<j} (rho^R tr(m E_ij) + rho^I tr(m F_ij)),
  // with rho_NN = 1 - sum_{i<N} rho_ii.
  const Eigen::Index n = dim_;
  CoordinateVector g;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    g.diag.push_back((m_(i, i) - m_(n - 1, n - 1)).real());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      g.re.push_back((m_(j, i) + m_(i, j)).real());
      g.im.push_back((kI * m_(j, i) - kI * m_(i, j)).real());
    }
  }
  return g;
}

BilinearSystem::BilinearSystem(ComplexMatrix h0, std::vector<ComplexMatrix> controls,
                               std::vector<FeedbackProtocol> protocols)
    : h0_(std::move(h0)), controls_(std::move(controls)), protocols_(std::move(protocols)) {
  if (h0_.rows() != h0_.cols() || h0_.rows() < 2) {
    throw std::invalid_argument("BilinearSystem: drift must be square with dim >= 2");
  }
  if (!is_hermitian(h0_)) throw std::invalid_argument("BilinearSystem: drift not Hermitian");
  if (controls_.empty()) throw std::invalid_argument("BilinearSystem: need at least one control");
  if (controls_.size() != protocols_.size()) {
    throw std::invalid_argument("BilinearSystem: one protocol per control Hamiltonian required");
  }
  for (std::size_t k = 0; k < controls_.size(); ++k) {
    if (controls_[k].rows() != dim() || controls_[k].cols() != dim()) {
      throw std::invalid_argument("BilinearSystem: control Hamiltonian dimension mismatch");
    }
    if (!is_hermitian(controls_[k])) {
      throw std::invalid_argument("BilinearSystem: control Hamiltonian not Hermitian");
    }
    if (protocols_[k].dim() != dim()) {
      throw std::invalid_argument("BilinearSystem: protocol dimension mismatch");
    }
  }
}

double protocol_value(const FeedbackProtocol& p, const ComplexMatrix& rho) {
  return p.value(rho);
}

DerivativeMatrix derivative_matrix(const FeedbackProtocol& p, const ComplexMatrix& rho) {
  const CoordinateVector g = p.gradient(rho);
  const Eigen::Index n = p.dim();
  DerivativeMatrix out{ComplexMatrix::Zero(n, n)};
  for (Eigen::Index i = 0; i + 1 < n; ++i) out.d(i, i) = g.diag[static_cast<std::size_t>(i)];
  std::size_t q = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j + 1; k < n; ++k, ++q) {
      out.d(j, k) = Complex(g.re[q], g.im[q]) / 2.0;
      out.d(k, j) = Complex(g.re[q], -g.im[q]) / 2.0;
    }
  }
  return out;
}

std::vector<double> control_values(const BilinearSystem& sys, const ComplexMatrix& rho) {
  std::vector<double> u;
  u.reserve(sys.num_controls());
  for (const auto& p : sys.protocols()) u.push_back(p.value(rho));
  return u;
}

ComplexMatrix hamiltonian_with(const BilinearSystem& sys, std::span<const double> amplitudes) {
  if (amplitudes.size() != sys.num_controls()) {
    throw std::invalid_argument("hamiltonian_with: wrong number of amplitudes");
  }
  ComplexMatrix h = sys.drift();
  for (std::size_t k = 0; k < amplitudes.size(); ++k) h += amplitudes[k] * sys.control(k);
  return h;
}

ComplexMatrix total_hamiltonian(const BilinearSystem& sys, const ComplexMatrix& rho) {
  const auto u = control_values(sys, rho);
  return hamiltonian_with(sys, u);
}

ComplexMatrix closed_loop_rhs(const BilinearSystem& sys, const ComplexMatrix& rho) {
  const ComplexMatrix h = total_hamiltonian(sys, rho);
  return -kI * (h * rho - rho * h);
}

double protocol_time_derivative(const BilinearSystem& sys, const FeedbackProtocol& p,
                                const ComplexMatrix& rho) {
  const DerivativeMatrix d = derivative_matrix(p, rho);
  const ComplexMatrix rhs = closed_loop_rhs(sys, rho);
  return (d.d * rhs).trace().real();
}

double l1_constant(const FeedbackProtocol& p, std::span<const ComplexMatrix> samples) {
  if (p.is_affine()) {
    return hs_norm(derivative_matrix(p, ComplexMatrix::Zero(p.dim(), p.dim())).d);
  }
  double best = 0.0;
  for (const auto& rho : samples) best = std::max(best, hs_norm(derivative_matrix(p, rho).d));
  return best;
}

double l0_cap(const FeedbackProtocol& p) {
  if (!p.is_affine()) {
    throw std::invalid_argument("l0_cap: only defined for affine protocols");
  }
  return hs_norm(p.affine_matrix()) + std::abs(p.affine_offset());
}

}  // namespace clol
