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

#pragma once

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include "lqgcm/errors.hpp"
#include "lqgcm/propagation.hpp"
#include "lqgcm/riccati.hpp"
#include "lqgcm/system_model.hpp"

namespace lqgcm {

/// Inter-measurement period. std::nullopt means "never measure".
using Period = std::optional<int>;

enum class PolicyCase { kMeasureEveryStep, kFinitePeriod, kNeverMeasure };

inline std::string_view to_string(PolicyCase c) {
  switch (c) {
    case PolicyCase::kMeasureEveryStep: return "MEASURE_EVERY_STEP";
    case PolicyCase::kFinitePeriod: return "FINITE_PERIOD";
    case PolicyCase::kNeverMeasure: return "NEVER_MEASURE";
  }
  return "UNKNOWN";
}

struct PolicyOptions {
  DareOptions dare;
  ErrorPropagation propagation = ErrorPropagation::kObservabilityForm;
  /// Safety cap on the bracket search for finite periods.
  int max_period = 10000;
  /// Truncation bound for the infinite discounted error sum.
  double tail_tol = 1e-9;
};

/// Everything the period/offset formulas read: plant, cost, the Riccati
/// solution and the error-propagation form.
struct PolicyInputs {
  LinearSystem sys;
  CostModel cost;
  AreSolution are;
  ErrorPropagation propagation = ErrorPropagation::kObservabilityForm;

  Matrix noise() const { return noise_term(sys, propagation); }
  /// Tr(Sigma_S C'PC)
  double noise_trace() const {
    return (sys.Sigma_S * sys.C.transpose() * are.P * sys.C).trace();
  }
};

inline PolicyInputs make_policy_inputs(const LinearSystem& sys, const CostModel& cost,
                                       const PolicyOptions& opts = {}) {
  return PolicyInputs{sys, cost, dare_solve(sys, cost, opts.dare), opts.propagation};
}

struct PolicySolution {
  PolicyInputs inputs;
  Period T_star;
  double r = 0.0;
  PolicyCase case_id = PolicyCase::kMeasureEveryStep;
  /// Tr(Sigma_S C'PC)
  double noise_trace = 0.0;
  /// sum_{t<T*} beta^t Tr(P_t phi), or the full series when T* is infinite.
  double error_penalty = 0.0;
  /// Set whenever A is Schur stable.
  std::optional<double> never_measure_threshold;

  const AreSolution& are() const { return inputs.are; }
  const LinearSystem& sys() const { return inputs.sys; }
  double O() const { return inputs.cost.O; }
  double beta() const { return inputs.cost.beta; }
  bool finite() const { return T_star.has_value(); }
};

/// Error statistics P_0..P_T without measurement; P_0 = 0.
struct ErrorCovSeq {
  std::vector<Matrix> P;
};

inline ErrorCovSeq error_cov_seq(const LinearSystem& sys, int T,
                                 ErrorPropagation prop = ErrorPropagation::kObservabilityForm) {
  if (T < 0) throw std::invalid_argument("error_cov_seq requires T >= 0");
  const Eigen::Index q = sys.states();
  const Matrix N = noise_term(sys, prop);
  ErrorCovSeq seq;
  seq.P.reserve(T + 1);
  seq.P.push_back(Matrix::Zero(q, q));
  for (int t = 0; t < T; ++t)
    seq.P.push_back(linalg::symmetrize(congruence(sys.A, seq.P.back(), prop) + N));
  return seq;
}

namespace detail {

/// sum_{t<T} beta^t Tr(P_t phi)
inline double discounted_error(int T, const PolicyInputs& in) {
  const Matrix N = in.noise();
  Matrix P = Matrix::Zero(in.sys.states(), in.sys.states());
  double sum = 0.0;
  double bt = 1.0;
  for (int t = 0; t < T; ++t) {
    sum += bt * (P * in.are.phi).trace();
    P = congruence(in.sys.A, P, in.propagation) + N;
    bt *= in.cost.beta;
  }
  return sum;
}

}  // namespace detail

/// Objective of the offset fixed point at a fixed period T:
///   sum_{t<T} beta^t Tr(P_t phi) + sum_{t=1..T} beta^t Tr(Sigma_S C'PC)
///   + beta^T (r + O)
inline double f_value(int T, double r, const PolicyInputs& in) {
  if (T < 1) throw std::invalid_argument("f_value requires T >= 1");
  const double beta = in.cost.beta;
  const double bT = std::pow(beta, T);
  const double noise = in.noise_trace() * beta * (1.0 - bT) / (1.0 - beta);
  return detail::discounted_error(T, in) + noise + bT * (r + in.cost.O);
}

/// h(T) = Tr(P_T phi) + beta Tr(Sigma_S C'PC) - (1 - beta)(r + O), so that
/// f(T+1) - f(T) = beta^T h(T).
inline double h_value(int T, double r, const PolicyInputs& in) {
  if (T < 1) throw std::invalid_argument("h_value requires T >= 1");
  const Matrix PT = error_cov_seq(in.sys, T, in.propagation).P.back();
  return (PT * in.are.phi).trace() + in.cost.beta * in.noise_trace() -
         (1.0 - in.cost.beta) * (r + in.cost.O);
}

/// sum_{t>=0} beta^t Tr(P_t phi) for Schur-stable A, truncated once
/// beta^N Tr(W phi)/(1 - beta) < tail_tol (P_t <= W bounds the tail).
inline double infinite_discounted_error(const PolicyInputs& in, double tail_tol = 1e-9) {
  const Matrix W = lyapunov_solve(in.sys, in.propagation);
  const double beta = in.cost.beta;
  const double bound = std::max(0.0, (W * in.are.phi).trace()) / (1.0 - beta);
  int N = 1;
  if (bound > tail_tol) N = static_cast<int>(std::ceil(std::log(tail_tol / bound) / std::log(beta))) + 1;
  return detail::discounted_error(N, in);
}

inline double never_measure_threshold(const PolicyInputs& in, double tail_tol = 1e-9) {
  const Matrix W = lyapunov_solve(in.sys, in.propagation);
  return (W * in.are.phi).trace() / (1.0 - in.cost.beta) - infinite_discounted_error(in, tail_tol);
}

/// Threshold on O at and above which a Schur-stable plant is never measured.
inline double never_measure_threshold(const LinearSystem& sys, const CostModel& cost,
                                      const PolicyOptions& opts = {}) {
  const double rho = spectral_radius(sys.A);
  if (rho >= 1.0 - kStabilityMargin)
    throw UnstableA("never-measure threshold needs a Schur-stable A", rho);
  return never_measure_threshold(make_policy_inputs(sys, cost, opts), opts.tail_tol);
}

/// Optimal period and offset for a solved Riccati problem.
///
/// The period is the first T whose partial sum
///   S(T) = sum_{t<T} (1 - beta^{t+1})/(1 - beta) Tr(G_t phi),
///   G_t = (A')^t C'Sigma_S C A^t,
/// exceeds O; S(T*-1) <= O < S(T*). T* = 1 when O < Tr(C'Sigma_S C phi). A
/// Schur-stable A with O at or above the never-measure threshold gives
/// T* = infinity.
inline PolicySolution optimal_period(PolicyInputs in, int max_period = 10000,
                                     double tail_tol = 1e-9) {
  PolicySolution ps;
  const double beta = in.cost.beta;
  const double O = in.cost.O;
  ps.noise_trace = in.noise_trace();
  const double noise_part = beta / (1.0 - beta) * ps.noise_trace;

  const double rho = spectral_radius(in.sys.A);
  if (rho < 1.0 - kStabilityMargin) ps.never_measure_threshold = never_measure_threshold(in, tail_tol);

  const Matrix N = in.noise();
  const double first_term = (N * in.are.phi).trace();
  const bool never = ps.never_measure_threshold && !(O < first_term) &&
                     O >= *ps.never_measure_threshold;
  if (never) {
    ps.case_id = PolicyCase::kNeverMeasure;
    ps.T_star = std::nullopt;
    ps.error_penalty = infinite_discounted_error(in, tail_tol);
    ps.r = ps.error_penalty + noise_part;
    ps.inputs = std::move(in);
    return ps;
  }

  int T = 0;
  double S = 0.0;
  Matrix G = N;
  double bt = beta;  // beta^{t+1}
  for (int k = 1; k <= max_period; ++k) {
    S += (1.0 - bt) / (1.0 - beta) * (G * in.are.phi).trace();
    if (S > O) {
      T = k;
      break;
    }
    G = congruence(in.sys.A, G, in.propagation);
    bt *= beta;
  }
  if (T == 0)
    throw PeriodSearchExhausted("no period up to " + std::to_string(max_period) +
                                " closes the measurement-cost bracket");

  ps.T_star = T;
  ps.case_id = T == 1 ? PolicyCase::kMeasureEveryStep : PolicyCase::kFinitePeriod;
  const double bT = std::pow(beta, T);
  ps.error_penalty = detail::discounted_error(T, in);
  ps.r = ps.error_penalty / (1.0 - bT) + noise_part + bT * O / (1.0 - bT);
  ps.inputs = std::move(in);
  return ps;
}

inline PolicySolution optimal_period(const LinearSystem& sys, const CostModel& cost,
                                     const PolicyOptions& opts = {}) {
  return optimal_period(make_policy_inputs(sys, cost, opts), opts.max_period, opts.tail_tol);
}

/// Same Riccati solution, different measurement cost.
inline PolicySolution with_measurement_cost(const PolicySolution& ps, double O,
                                            int max_period = 10000) {
  PolicyInputs in = ps.inputs;
  in.cost.O = O;
  return optimal_period(std::move(in), max_period);
}

/// beta^T O / (1 - beta^T): discounted cost of measuring every T steps.
inline double periodic_measurement_cost(Period T, double beta, double O) {
  if (!T) return 0.0;
  const double bT = std::pow(beta, *T);
  return bT * O / (1.0 - bT);
}

struct ValueBreakdown {
  double V = 0.0;    // x'Px + r
  double V_s = 0.0;  // V without the measurement charges
  double V_c = 0.0;  // classic LQG value: x'Px + beta/(1-beta) Tr(Sigma_S C'PC)
  double V_e = 0.0;  // measure-every-step total: V_c + beta O/(1-beta)
  double V_e_without_noise = 0.0;  // x'Px + beta O/(1-beta)
  /// beta O/(1-beta) - beta^T* O/(1-beta^T*)
  double measurement_saving = 0.0;
};

inline ValueBreakdown value_at(const PolicySolution& ps, const Vector& x) {
  if (x.size() != ps.are().P.rows()) throw DimensionMismatch("state has wrong dimension");
  const double beta = ps.beta();
  const double O = ps.O();
  const double quad = x.dot(ps.are().P * x);
  const double every = beta * O / (1.0 - beta);
  const double periodic = periodic_measurement_cost(ps.T_star, beta, O);
  ValueBreakdown v;
  v.V = quad + ps.r;
  v.V_s = v.V - periodic;
  v.V_c = quad + beta / (1.0 - beta) * ps.noise_trace;
  v.V_e = v.V_c + every;
  v.V_e_without_noise = quad + every;
  v.measurement_saving = every - periodic;
  return v;
}

}  // namespace lqgcm
