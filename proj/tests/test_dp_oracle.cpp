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

TEST(FixedPoint, Sys1SmallGrid) {
  const PolicySolution ps = testing::solve(testing::sys1(10));
  const OracleReport rep = solve_r_fixed_point(ps.inputs, OracleOptions{50});
  EXPECT_EQ(rep.T_oracle, Period(6));
  EXPECT_NEAR(rep.r_oracle, ps.r, 1e-6);
  EXPECT_FALSE(rep.grid_capped);
  EXPECT_TRUE(rep.note.empty());
  ASSERT_EQ(rep.f_curve.size(), 50u);
  EXPECT_GT(rep.f_curve[6].second - rep.f_curve[5].second, 0.0);  // f(7) > f(6)
}

TEST(FixedPoint, ZeroCost) {
  const PolicySolution ps = testing::solve(testing::sys1(0));
  const OracleReport rep = solve_r_fixed_point(ps.inputs);
  EXPECT_EQ(rep.T_oracle, Period(1));
  EXPECT_NEAR(rep.r_oracle, ps.beta() / (1 - ps.beta()) * ps.noise_trace, 1e-9);
}

TEST(FixedPoint, Sys2NoInteriorMinimizer) {
  const PolicySolution ps = testing::solve(testing::sys2(7));
  const OracleReport rep = solve_r_fixed_point(ps.inputs, OracleOptions{500});
  EXPECT_TRUE(rep.strictly_decreasing);
  EXPECT_TRUE(rep.grid_capped);
  EXPECT_FALSE(rep.T_oracle.has_value());
  EXPECT_EQ(rep.note, "grid-capped: no interior minimizer");
  EXPECT_NEAR(rep.r_oracle, ps.r, 1e-6);
}

TEST(FixedPoint, ContractionRate) {
  for (double O : {1.0, 10.0, 50.0, 300.0}) {
    const PolicySolution ps = testing::solve(testing::sys1(O));
    const OracleReport rep = solve_r_fixed_point(ps.inputs);
    EXPECT_LE(rep.max_contraction_ratio, ps.beta() + 1e-6) << O;
    EXPECT_GT(rep.convergence_iters, 1);
  }
}

TEST(FixedPoint, RejectsEmptyGrid) {
  const PolicySolution ps = testing::solve(testing::sys1());
  EXPECT_THROW(solve_r_fixed_point(ps.inputs, OracleOptions{0}), std::invalid_argument);
}

TEST(FixedPoint, DefaultGrid) {
  EXPECT_EQ(default_oracle_grid(6), 200);
  EXPECT_EQ(default_oracle_grid(80), 320);
  EXPECT_EQ(default_oracle_grid(std::nullopt), 200);
}

TEST(OracleProperty, AgreesWithClosedForm) {
  ProblemGenerator gen(606);
  for (int k = 0; k < 50; ++k) {
    const auto [p, ps] = gen.finite_period_problem();
    const int grid = default_oracle_grid(ps.T_star);
    const OracleReport rep = solve_r_fixed_point(ps.inputs, OracleOptions{grid});
    EXPECT_EQ(rep.T_oracle, ps.T_star) << "case " << k;
    EXPECT_NEAR(rep.r_oracle, ps.r, 1e-6 * std::max(1.0, std::abs(ps.r))) << "case " << k;
    EXPECT_LE(rep.max_contraction_ratio, p.cost.beta + 1e-6) << "case " << k;
    EXPECT_LT(std::abs(fixed_point_residual(ps.inputs, ps.r, grid)), 1e-8 * std::max(1.0, ps.r));
  }
}

TEST(OracleProperty, CovarianceFormAgreesToo) {
  ProblemGenerator gen(607);
  PolicyOptions opts;
  opts.propagation = ErrorPropagation::kCovarianceForm;
  for (int k = 0; k < 20; ++k) {
    auto [p, ps0] = gen.finite_period_problem();
    const PolicySolution ps = optimal_period(p.sys, p.cost, opts);
    if (!ps.T_star) continue;
    const OracleReport rep = solve_r_fixed_point(ps.inputs, OracleOptions{default_oracle_grid(ps.T_star)});
    EXPECT_EQ(rep.T_oracle, ps.T_star) << k;
    EXPECT_NEAR(rep.r_oracle, ps.r, 1e-6 * std::max(1.0, ps.r)) << k;
  }
}

TEST(InnerDp, ClosedFormCollapsesAtRiccatiFixedPoint) {
  ProblemGenerator gen(31);
  for (int k = 0; k < 20; ++k) {
    const auto [p, ps] = gen.finite_period_problem();
    const int T = std::min(*ps.T_star, 12);
    const InnerDpResult res = inner_dp_check(ps.inputs, ps.are().P, ps.r, T, p.x0, 2, 1, 1);
    const double expected = p.x0.dot(ps.are().P * p.x0) + f_value(T, ps.r, ps.inputs);
    EXPECT_NEAR(res.closed_form, expected, 1e-10 * std::max(1.0, std::abs(expected))) << k;
  }
}

TEST(InnerDp, SingleStep) {
  const PolicySolution ps = testing::solve(testing::sys1(10));
  Vector x(3);
  x << 3.0, -1.0, 2.0;
  const InnerDpResult res = inner_dp_check(ps.inputs, ps.are().P, ps.r, 1, x, 20000, 5);
  EXPECT_LT(res.gap, 3 * res.mc_std_error);
  EXPECT_GT(res.mc_std_error, 0.0);
}

TEST(InnerDp, ZeroStateZeroDynamics) {
  Problem p = testing::sys2(5);
  p.sys.A.setZero();
  const PolicySolution ps = testing::solve(p);
  const int T = 4;
  const double r = 2.5;
  const InnerDpResult res = inner_dp_check(ps.inputs, ps.are().P, r, T, Vector::Zero(3), 2, 1, 1);
  const auto fr = finite_riccati(ps.are().P, T, p.sys, p.cost);
  double noise = 0.0;
  for (int t = 1; t <= T; ++t)
    noise += std::pow(p.cost.beta, t) * (p.sys.Sigma_S * fr.L[T - t]).trace();
  double err = 0.0;
  for (int t = 1; t < T; ++t) err += std::pow(p.cost.beta, t) * (p.sys.noise_gramian() * fr.phi[t]).trace();
  EXPECT_NEAR(res.closed_form, std::pow(p.cost.beta, T) * (r + p.cost.O) + noise + err, 1e-12);
  const ControlPacket pkt = make_packet(Vector::Zero(3), ps, T);
  for (const Vector& u : pkt.controls) EXPECT_EQ(u, Vector::Zero(2));
}

TEST(InnerDp, RejectsBadArguments) {
  const PolicySolution ps = testing::solve(testing::sys1());
  EXPECT_THROW(inner_dp_check(ps.inputs, ps.are().P, 0.0, 0, Vector::Zero(3), 10, 1), std::invalid_argument);
  EXPECT_THROW(inner_dp_check(ps.inputs, ps.are().P, 0.0, 2, Vector::Zero(3), 1, 1), std::invalid_argument);
}

TEST(Probe, Sys1IsLocallyOptimal) {
  const Problem p = testing::sys1(10);
  const PolicySolution ps = testing::solve(p);
  const ProbeResult res = policy_suboptimality_probe(p, ps, default_perturbations(6));
  EXPECT_EQ(res.entries.size(), 4u);
  EXPECT_LE(res.max_gain, 1e-6);
  EXPECT_TRUE(std::isfinite(res.baseline));
}

TEST(Probe, ZeroGainIsWorseOnStablePlant) {
  const Problem p = testing::sys2(6);
  const PolicySolution ps = testing::solve(p);
  ASSERT_TRUE(ps.T_star.has_value());
  const ProbeResult res = policy_suboptimality_probe(p, ps, {{*ps.T_star, 0.0}});
  ASSERT_EQ(res.entries.size(), 1u);
  EXPECT_TRUE(std::isfinite(res.entries[0].cost));
  EXPECT_GT(res.entries[0].cost, res.baseline);
  EXPECT_LT(res.max_gain, 0.0);
}

TEST(Probe, ZeroGainOnUnstablePlantDiverges) {
  const Problem p = testing::sys1(10);
  EXPECT_TRUE(std::isinf(periodic_strategy_cost(p.sys, p.cost, p.x0, 6, Matrix::Zero(2, 3))));
}

TEST(Probe, MeasureEveryStepMatchesClassicValue) {
  const Problem p = testing::sys1(10);
  const PolicySolution ps = testing::solve(p);
  const ValueBreakdown v = value_at(ps, p.x0);
  EXPECT_NEAR(periodic_strategy_cost(p.sys, p.cost, p.x0, 1, ps.are().K), v.V_e, 1e-8 * v.V_e);
}

TEST(Probe, NeverMeasureNeedsFinitePeriod) {
  const Problem p = testing::sys2(7);
  EXPECT_THROW(policy_suboptimality_probe(p, testing::solve(p), {}), InfinitePeriod);
}

TEST(Verify, Sys1Passes) {
  const Problem p = testing::sys1(10);
  const VerificationReport rep = verify_policy(p, testing::solve(p));
  for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  EXPECT_TRUE(rep.passed());
}

TEST(Verify, Sys2PassesWithNote) {
  const Problem p = testing::sys2(7);
  const VerificationReport rep = verify_policy(p, testing::solve(p));
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.oracle.note, "grid-capped: no interior minimizer");
}

TEST(Verify, CorruptedOffsetFailsResidualCheck) {
  const Problem p = testing::sys1(10);
  PolicySolution ps = testing::solve(p);
  ps.r += 1.0;
  const VerificationReport rep = verify_policy(p, ps);
  EXPECT_FALSE(rep.passed());
  bool residual_failed = false;
  for (const auto& c : rep.checks)
    if (c.name == "fixed_point_residual") residual_failed = !c.passed;
  EXPECT_TRUE(residual_failed);
}

}  // namespace
}  // namespace lqgcm
