// Copyright 2026 The lqgcm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace lqgcm {
namespace {

using testing::ProblemGenerator;

Problem scalar_problem(double a, double b, double q, double r, double beta) {
  Problem p;
  p.sys.A = Matrix::Constant(1, 1, a);
  p.sys.B = Matrix::Constant(1, 1, b);
  p.sys.C = Matrix::Identity(1, 1);
  p.sys.Sigma_S = Matrix::Identity(1, 1);
  p.cost.Q = Matrix::Constant(1, 1, q);
  p.cost.R = Matrix::Constant(1, 1, r);
  p.cost.beta = beta;
  p.x0 = Vector::Ones(1);
  return p;
}

TEST(Dare, ScalarClosedForm) {
  // a = b = q = r = 1: beta P^2 + (1 - 2 beta) P - 1 = 0.
  const double beta = 0.999;
  const Problem p = scalar_problem(1.0, 1.0, 1.0, 1.0, beta);
  const AreSolution s = dare_solve(p.sys, p.cost);
  const double closed = ((2 * beta - 1) + std::sqrt((1 - 2 * beta) * (1 - 2 * beta) + 4 * beta)) / (2 * beta);
  EXPECT_NEAR(s.P(0, 0), closed, 1e-9);
  EXPECT_NEAR(s.P(0, 0), 1.6177574084817037, 1e-9);
  EXPECT_NEAR(s.K(0, 0), beta * s.P(0, 0) / (1.0 + beta * s.P(0, 0)), 1e-12);
  EXPECT_NEAR(s.phi(0, 0), beta * s.P(0, 0) * s.K(0, 0), 1e-12);
}

TEST(Dare, ExampleSystemsFixedPoint) {
  for (const Problem& p : {testing::sys1(), testing::sys2()}) {
    const AreSolution s = dare_solve(p.sys, p.cost);
    EXPECT_LT(linalg::sup_norm(riccati_map(s.P, p.sys, p.cost) - s.P), 1e-9);
    EXPECT_TRUE(linalg::is_symmetric(s.P, 0.0));
    EXPECT_TRUE(linalg::is_pd(s.P));
    EXPECT_TRUE(linalg::is_psd(s.phi));
    EXPECT_TRUE(s.warnings.empty());
    EXPECT_EQ(s.K.rows(), 2);
    EXPECT_EQ(s.K.cols(), 3);
  }
}

TEST(Dare, Sys1ClassicValue) {
  const Problem p = testing::sys1();
  const AreSolution s = dare_solve(p.sys, p.cost);
  const double trace = (p.sys.Sigma_S * s.P).trace();
  const double Vc = p.x0.dot(s.P * p.x0) + p.cost.beta / (1 - p.cost.beta) * trace;
  EXPECT_NEAR(Vc, 169.45, 0.5);
}

TEST(Dare, NonConvergenceCarriesResidual) {
  const Problem p = testing::sys1();
  DareOptions opts;
  opts.max_iter = 3;
  try {
    dare_solve(p.sys, p.cost, opts);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_GT(e.last_residual(), opts.tol);
  }
}

TEST(Dare, UncontrollableUnstableModeDoesNotConverge) {
  Problem p = scalar_problem(1.5, 0.0, 1.0, 1.0, 0.95);
  DareOptions opts;
  opts.max_iter = 2000;
  EXPECT_THROW(dare_solve(p.sys, p.cost, opts), NonConvergence);
}

TEST(Dare, UncontrollableStableModeWarns) {
  Problem p = scalar_problem(0.5, 0.0, 1.0, 1.0, 0.95);
  const AreSolution s = dare_solve(p.sys, p.cost);
  EXPECT_FALSE(s.warnings.empty());
  EXPECT_NEAR(s.P(0, 0), 1.0 / (1.0 - 0.95 * 0.25), 1e-9);
}

TEST(Dare, DimensionMismatchThrows) {
  Problem p = testing::sys1();
  p.cost.R = Matrix::Identity(3, 3);
  EXPECT_THROW(dare_solve(p.sys, p.cost), DimensionMismatch);
}

TEST(DareProperty, RandomSystems) {
  ProblemGenerator gen(2024);
  for (int k = 0; k < 100; ++k) {
    const Problem p = gen.problem();
    const AreSolution s = dare_solve(p.sys, p.cost);
    SCOPED_TRACE("case " + std::to_string(k));
    const double scale = std::max(1.0, linalg::sup_norm(s.P));
    EXPECT_LT(linalg::sup_norm(riccati_map(s.P, p.sys, p.cost) - s.P), 1e-8 * scale);
    EXPECT_GE(linalg::min_sym_eigenvalue(s.P - p.cost.Q), -1e-9 * scale);
    EXPECT_TRUE(linalg::is_psd(s.phi) || linalg::sup_norm(s.phi) < 1e-12);
    // The discounted closed loop is stable.
    const Matrix Acl = std::sqrt(p.cost.beta) * (p.sys.A - p.sys.B * s.K);
    EXPECT_LT(spectral_radius(Acl), 1.0);
    // P = Q + beta A'PA - phi, phi = beta A'PB K.
    const Matrix rebuilt = p.cost.Q + p.cost.beta * p.sys.A.transpose() * s.P * p.sys.A - s.phi;
    EXPECT_LT(linalg::sup_norm(rebuilt - s.P), 1e-8 * scale);
  }
}

TEST(RiccatiMapProperty, Monotone) {
  ProblemGenerator gen(77);
  for (int k = 0; k < 100; ++k) {
    const Problem p = gen.problem();
    const Eigen::Index q = p.sys.states();
    const Matrix L1 = gen.spd(q, 0.01);
    const Matrix L2 = L1 + gen.spd(q, 0.0);
    const Matrix d = riccati_map(L2, p.sys, p.cost) - riccati_map(L1, p.sys, p.cost);
    EXPECT_GE(linalg::min_sym_eigenvalue(d), -1e-9 * std::max(1.0, linalg::sup_norm(L2))) << k;
  }
}

TEST(FiniteRiccati, TerminalAtFixedPointIsStationary) {
  const Problem p = testing::sys1();
  const AreSolution s = dare_solve(p.sys, p.cost);
  const FiniteRiccati fr = finite_riccati(s.P, 6, p.sys, p.cost);
  ASSERT_EQ(fr.L.size(), 7u);
  ASSERT_EQ(fr.phi.size(), 6u);
  ASSERT_EQ(fr.gains.size(), 6u);
  for (const Matrix& L : fr.L) EXPECT_LT(linalg::sup_norm(L - s.P), 1e-9);
  for (const Matrix& phi : fr.phi) EXPECT_LT(linalg::sup_norm(phi - s.phi), 1e-9);
  for (const Matrix& K : fr.gains) EXPECT_LT(linalg::sup_norm(K - s.K), 1e-9);
}

TEST(FiniteRiccati, StageIndexing) {
  const Problem p = testing::sys2();
  const Matrix terminal = Matrix::Identity(3, 3);
  const int T = 4;
  const FiniteRiccati fr = finite_riccati(terminal, T, p.sys, p.cost);
  EXPECT_LT(linalg::sup_norm(fr.L[0] - terminal), 0.0 + 1e-15);
  for (int t = 0; t < T; ++t) {
    EXPECT_LT(linalg::sup_norm(fr.L[t + 1] - riccati_map(fr.L[t], p.sys, p.cost)), 1e-15);
    // Stage t is steered by the cost-to-go with T - t - 1 steps remaining.
    const Matrix K = detail::gain(fr.L[T - t - 1], p.sys, p.cost);
    EXPECT_LT(linalg::sup_norm(fr.gains[t] - K), 1e-15);
  }
}

TEST(FiniteRiccati, ConvergesFromZeroTerminal) {
  const Problem p = testing::sys1();
  const AreSolution s = dare_solve(p.sys, p.cost);
  const FiniteRiccati fr = finite_riccati(Matrix::Zero(3, 3), 400, p.sys, p.cost);
  EXPECT_LT(linalg::sup_norm(fr.L.back() - s.P), 1e-8);
}

TEST(FiniteRiccati, RejectsEmptyHorizon) {
  const Problem p = testing::sys1();
  EXPECT_THROW(finite_riccati(Matrix::Zero(3, 3), 0, p.sys, p.cost), std::invalid_argument);
}

TEST(Spectrum, ExampleMatrices) {
  EXPECT_NEAR(spectral_radius(testing::sys1_A()), 1.3561, 1e-3);
  EXPECT_NEAR(spectral_radius(testing::sys2_A()), 0.9755, 1e-3);
  const Vector mags = eigenvalue_magnitudes(testing::sys1_A());
  ASSERT_EQ(mags.size(), 3);
  EXPECT_GE(mags(0), mags(1));
  EXPECT_GE(mags(1), mags(2));
}

TEST(Spectrum, RotationHasUnitRadius) {
  Matrix R(2, 2);
  R << 0.0, -1.0, 1.0, 0.0;
  EXPECT_NEAR(spectral_radius(R), 1.0, 1e-14);
  EXPECT_THROW(spectral_radius(Matrix::Ones(2, 3)), DimensionMismatch);
}

TEST(Lyapunov, Sys2MatchesPublishedGramian) {
  Matrix expected(3, 3);
  expected << 2.5129, -0.8009, 0.2130, -0.8009, 0.9080, 0.5897, 0.2130, 0.5897, 0.8710;
  const Matrix W = lyapunov_solve(testing::sys2().sys);
  EXPECT_LT((W - expected).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Lyapunov, UnstableThrows) {
  try {
    lyapunov_solve(testing::sys1().sys);
    FAIL() << "expected UnstableA";
  } catch (const UnstableA& e) {
    EXPECT_NEAR(e.spectral_radius(), 1.3561, 1e-3);
  }
}

TEST(LyapunovProperty, ResidualBothForms) {
  ProblemGenerator gen(5);
  int solved = 0;
  while (solved < 100) {
    Problem p = gen.problem();
    const double rho = spectral_radius(p.sys.A);
    if (rho >= 0.999) p.sys.A *= gen.uniform(0.2, 0.98) / rho;
    for (auto prop : {ErrorPropagation::kObservabilityForm, ErrorPropagation::kCovarianceForm}) {
      const Matrix W = lyapunov_solve(p.sys, prop);
      const Matrix N = noise_term(p.sys, prop);
      const Matrix resid = W - congruence(p.sys.A, W, prop) - N;
      EXPECT_LT(linalg::sup_norm(resid), 1e-9 * std::max(1.0, linalg::sup_norm(W)));
      EXPECT_TRUE(linalg::is_pd(W));
    }
    ++solved;
  }
}

TEST(Propagation, FormsAgreeForSymmetricData) {
  Matrix A(2, 2);
  A << 0.3, 0.1, 0.1, -0.2;
  LinearSystem s;
  s.A = A;
  s.B = Matrix::Ones(2, 1);
  s.C = Matrix::Identity(2, 2);
  s.Sigma_S = Matrix::Identity(2, 2);
  EXPECT_LT(linalg::sup_norm(lyapunov_solve(s, ErrorPropagation::kObservabilityForm) -
                             lyapunov_solve(s, ErrorPropagation::kCovarianceForm)),
            1e-14);
  EXPECT_EQ(parse_propagation("covariance"), ErrorPropagation::kCovarianceForm);
  EXPECT_EQ(parse_propagation("observability"), ErrorPropagation::kObservabilityForm);
  EXPECT_FALSE(parse_propagation("bogus").has_value());
}

}  // namespace
}  // namespace lqgcm
