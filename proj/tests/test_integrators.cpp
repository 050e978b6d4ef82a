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

#include <cmath>
#include <complex>
#include <vector>

#include <gtest/gtest.h>

#include "clol/analysis.hpp"
#include "clol/integrators.hpp"
#include "clol/pipeline.hpp"
#include "clol/two_qubit.hpp"
#include "test_support.hpp"

namespace clol {
namespace {

using testing::max_abs;

TEST(Tableau, Examples) {
  const ButcherTableau& euler = tableau(1);
  EXPECT_EQ(euler.stages, 1);
  EXPECT_EQ(euler.b, std::vector<double>{1.0});
  const ButcherTableau& rk4 = tableau(4);
  ASSERT_EQ(rk4.stages, 4);
  EXPECT_DOUBLE_EQ(rk4.b[0], 1.0 / 6);
  EXPECT_DOUBLE_EQ(rk4.b[1], 2.0 / 6);
  EXPECT_DOUBLE_EQ(rk4.b[2], 2.0 / 6);
  EXPECT_DOUBLE_EQ(rk4.b[3], 1.0 / 6);
  const ButcherTableau& rk5 = tableau(5);
  EXPECT_EQ(rk5.stages, 6);
  double sum = 0.0;
  for (double b : rk5.b) sum += b;
  EXPECT_NEAR(sum, 1.0, 1e-15);
  for (int o = 1; o <= 5; ++o) {
    EXPECT_NO_THROW(tableau(o).validate());
    EXPECT_EQ(tableau(o).order, o);
  }
  EXPECT_THROW(tableau(0), std::out_of_range);
  EXPECT_THROW(tableau(6), std::out_of_range);
}

TEST(Tableau, ValidateRejectsBrokenTables) {
  ButcherTableau t = tableau(4);
  t.b[0] += 0.1;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = tableau(4);
  t.c[1] = 0.4;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = tableau(4);
  t.a[1][1] = 0.1;
  t.c[1] += 0.1;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = tableau(4);
  t.b.pop_back();
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(RkStep, ZeroRhsLeavesStateUnchanged) {
  const MatrixRhs zero = [](const ComplexMatrix& y) { return ComplexMatrix::Zero(y.rows(), y.cols()); };
  const ComplexMatrix y = ComplexMatrix::Identity(3, 3) / 3.0;
  for (int o = 1; o <= 5; ++o) EXPECT_EQ(max_abs(rk_step(tableau(o), zero, y, 0.1) - y), 0.0);
}

TEST(RkStep, EulerMatchesClosedLoopRecursion) {
  const auto s = twoqubit::default_setup();
  const MatrixRhs f = [&](const ComplexMatrix& y) { return closed_loop_rhs(s.sys, y); };
  const double h = 0.01;
  const ComplexMatrix rho = s.rho0.matrix();
  const ComplexMatrix h_rho = twoqubit::drift_hamiltonian() - 2.0 * twoqubit::control_hamiltonian();
  const ComplexMatrix expected = rho - kI * h * (h_rho * rho - rho * h_rho);
  EXPECT_MAT_NEAR(rk_step(tableau(1), f, rho, h), expected, 1e-15);
}

TEST(RkStep, Rk4ScalarTaylorPolynomial) {
  const Complex lambda(-0.7, 1.3);
  const double h = 0.2;
  const MatrixRhs f = [&](const ComplexMatrix& y) { return ComplexMatrix(lambda * y); };
  ComplexMatrix y(1, 1);
  y(0, 0) = 1.0;
  const Complex z = lambda * h;
  const Complex expected = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
  EXPECT_LE(std::abs(rk_step(tableau(4), f, y, h)(0, 0) - expected), 1e-15);
}

TEST(RkStep, ScalarLinearOrder) {
  // Local error of order p methods on y' = y is O(h^{p+1}).
  const MatrixRhs f = [](const ComplexMatrix& y) { return y; };
  ComplexMatrix y(1, 1);
  y(0, 0) = 1.0;
  for (int o = 1; o <= 5; ++o) {
    const double e1 = std::abs(rk_step(tableau(o), f, y, 0.1)(0, 0) - std::exp(0.1));
    const double e2 = std::abs(rk_step(tableau(o), f, y, 0.05)(0, 0) - std::exp(0.05));
    EXPECT_NEAR(std::log2(e1 / e2), o + 1, 0.2) << "order " << o;
  }
}

TEST(Step1, SingleEulerStep) {
  const auto s = twoqubit::default_setup();
  const ThetaSequence th = step1_simulate(s.sys, s.rho0, 1.0, 1, 1);
  ASSERT_EQ(th.points.size(), 2u);
  EXPECT_EQ(th.n_grid, 1);
  EXPECT_DOUBLE_EQ(th.step, 1.0);
  const ComplexMatrix rho = s.rho0.matrix();
  const ComplexMatrix h_rho = twoqubit::drift_hamiltonian() - 2.0 * twoqubit::control_hamiltonian();
  EXPECT_MAT_NEAR(th.points[0], rho, 0.0);
  EXPECT_MAT_NEAR(th.points[1], rho - kI * (h_rho * rho - rho * h_rho), 1e-14);
}

TEST(Step1, ZeroHamiltoniansKeepState) {
  const ComplexMatrix z = ComplexMatrix::Zero(3, 3);
  const BilinearSystem sys(z, {z}, {FeedbackProtocol::constant(3, 1.0)});
  std::mt19937_64 rng(21);
  const DensityMatrix rho(random_density_matrix(3, rng));
  for (int o = 1; o <= 5; ++o) {
    const ThetaSequence th = step1_simulate(sys, rho, 2.0, 16, o);
    for (const auto& p : th.points) EXPECT_LE(max_abs(p - rho.matrix()), 1e-15);
  }
}

TEST(Step1, RejectsBadArguments) {
  const auto s = twoqubit::default_setup();
  EXPECT_THROW(step1_simulate(s.sys, s.rho0, 1.0, 0, 1), std::invalid_argument);
  EXPECT_THROW(step1_simulate(s.sys, s.rho0, -1.0, 4, 1), std::invalid_argument);
  EXPECT_THROW(step1_simulate(s.sys, s.rho0, 1.0, 4, 7), std::out_of_range);
  ButcherTableau broken = tableau(2);
  broken.b = {0.5, 0.6};
  EXPECT_THROW(step1_simulate(s.sys, s.rho0, 1.0, 4, broken), std::invalid_argument);
}

TEST(Step1, DivergenceIsReported) {
  ComplexMatrix h0 = testing::diag({1e200, -1e200});
  const BilinearSystem sys(h0, {h0}, {FeedbackProtocol::constant(2, 1e200)});
  const DensityMatrix rho(ComplexMatrix::Constant(2, 2, 0.5));
  EXPECT_THROW(step1_simulate(sys, rho, 1e100, 1, 4), DivergenceError);
}

class ConvergenceOrder : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    setup_ = new twoqubit::Setup(twoqubit::default_setup());
    ref_ = new ReferenceTrajectory(
        ReferenceTrajectory::build(setup_->sys, setup_->rho0, 1.0, {64 * 4096, 1e-9, true}));
  }
  static void TearDownTestSuite() {
    delete ref_;
    delete setup_;
  }
  static double theta_error(int order, int n) {
    const ThetaSequence th = step1_simulate(setup_->sys, setup_->rho0, 1.0, n, order);
    double worst = 0.0;
    for (std::size_t j = 0; j < th.points.size(); ++j) {
      worst = std::max(worst, hs_norm(th.points[j] - ref_->state(ref_->coarse_index(j, n))));
    }
    return worst;
  }
  static twoqubit::Setup* setup_;
  static ReferenceTrajectory* ref_;
};
twoqubit::Setup* ConvergenceOrder::setup_ = nullptr;
ReferenceTrajectory* ConvergenceOrder::ref_ = nullptr;

TEST_F(ConvergenceOrder, EmpiricalOrderPerTableau) {
  const std::vector<int> grids{64, 128, 256, 512, 1024, 2048, 4096};
  for (int o = 1; o <= 5; ++o) {
    std::vector<double> x;
    std::vector<double> y;
    for (int n : grids) {
      x.push_back(n);
      y.push_back(theta_error(o, n));
    }
    // Points within 10x of the reference self-consistency error are excluded.
    const double slope = slope_fit(x, y, 10.0 * ref_->validation_error());
    EXPECT_GE(-slope, o - 0.5) << "order " << o;
    EXPECT_LE(-slope, o + 0.7) << "order " << o;
  }
}

TEST_F(ConvergenceOrder, Rk4HalvingGainsFactorSixteen) {
  const double ratio = theta_error(4, 1024) / theta_error(4, 2048);
  EXPECT_GT(ratio, 12.0);
  EXPECT_LT(ratio, 20.0);
}

TEST_F(ConvergenceOrder, TracePreserved) {
  for (int o = 1; o <= 5; ++o) {
    const ThetaSequence th = step1_simulate(setup_->sys, setup_->rho0, 1.0, 64, o);
    for (const auto& p : th.points) {
      EXPECT_LE(std::abs(p.trace() - Complex(1.0)), 1e-10);
      EXPECT_EQ(hermiticity_defect(p), 0.0);
    }
  }
}

}  // namespace
}  // namespace clol
