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
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lqgcm/errors.hpp"
#include "lqgcm/measurement_policy.hpp"
#include "lqgcm/random.hpp"
#include "lqgcm/riccati.hpp"
#include "lqgcm/simulator.hpp"

// Brute-force checks of the analytic pipeline. Nothing here calls
// optimal_period, f_value, error_cov_seq or the offset formulas; traces are
// rebuilt from explicit matrix powers.

namespace lqgcm {

struct OracleOptions {
  int T_max = 200;
  double tol = 1e-12;  // relative to max(1, |r|)
  int max_iter = 1000000;
};

/// Grid size for a given analytic period: max(200, 4 T*).
inline int default_oracle_grid(Period analytic) {
  return analytic ? std::max(200, 4 * *analytic) : 200;
}

struct OracleReport {
  double r_oracle = 0.0;
  /// Minimizer of the f-curve; nullopt when the curve decreases over the
  /// whole grid (no interior minimizer).
  Period T_oracle;
  int argmin = 0;
  std::vector<std::pair<int, double>> f_curve;
  std::optional<double> inner_dp_gap;
  int convergence_iters = 0;
  bool grid_capped = false;
  bool strictly_decreasing = false;
  double max_contraction_ratio = 0.0;
  int T_max = 0;
  std::string note;
};

namespace oracle_detail {

/// Tr(P_t phi) for t = 0..T_max-1 with P_t = sum_{tau<t} G_tau built from
/// explicit powers A^tau.
inline std::vector<double> error_traces(const PolicyInputs& in, int T_max) {
  const auto& sys = in.sys;
  const Eigen::Index q = sys.states();
  const bool obs = in.propagation == ErrorPropagation::kObservabilityForm;
  const Matrix N = obs ? Matrix(sys.C.transpose() * sys.Sigma_S * sys.C)
                       : Matrix(sys.C * sys.Sigma_S * sys.C.transpose());
  std::vector<double> traces(T_max);
  Matrix power = Matrix::Identity(q, q);
  Matrix P = Matrix::Zero(q, q);
  for (int t = 0; t < T_max; ++t) {
    traces[t] = P.cwiseProduct(in.are.phi.transpose()).sum();
    const Matrix G = obs ? Matrix(power.transpose() * N * power) : Matrix(power * N * power.transpose());
    P += G;
    power = sys.A * power;
  }
  return traces;
}

struct Curve {
  std::vector<double> error;  // sum_{t<T} beta^t Tr(P_t phi), index T
  std::vector<double> noise;  // sum_{t=1..T} beta^t Tr(Sigma_S C'PC), index T
  std::vector<double> disc;   // beta^T
  double O = 0.0;

  double f(int T, double r) const { return error[T] + noise[T] + disc[T] * (r + O); }
};

inline Curve build_curve(const PolicyInputs& in, int T_max) {
  const auto traces = error_traces(in, T_max);
  const double beta = in.cost.beta;
  const Matrix CPC = in.sys.C.transpose() * in.are.P * in.sys.C;
  const double n = CPC.cwiseProduct(in.sys.Sigma_S.transpose()).sum();
  Curve c;
  c.O = in.cost.O;
  c.error.assign(T_max + 1, 0.0);
  c.noise.assign(T_max + 1, 0.0);
  c.disc.assign(T_max + 1, 1.0);
  for (int T = 1; T <= T_max; ++T) {
    c.error[T] = c.error[T - 1] + std::pow(beta, T - 1) * traces[T - 1];
    c.disc[T] = std::pow(beta, T);
    c.noise[T] = c.noise[T - 1] + c.disc[T] * n;
  }
  return c;
}

inline std::pair<int, double> minimize(const Curve& c, int T_max, double r) {
  int best = 1;
  double v = c.f(1, r);
  for (int T = 2; T <= T_max; ++T) {
    const double f = c.f(T, r);
    if (f < v) {
      v = f;
      best = T;
    }
  }
  return {best, v};
}

}  // namespace oracle_detail

/// Iterates r <- min_{1<=T<=T_max} f(T; r) from r = 0 to its fixed point.
inline OracleReport solve_r_fixed_point(const PolicyInputs& in, const OracleOptions& opts = {}) {
  if (opts.T_max < 1) throw std::invalid_argument("T_max must be >= 1");
  const auto curve = oracle_detail::build_curve(in, opts.T_max);
  OracleReport rep;
  rep.T_max = opts.T_max;
  double r = 0.0;
  double prev_step = 0.0;
  bool converged = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double next = oracle_detail::minimize(curve, opts.T_max, r).second;
    const double step = std::abs(next - r);
    r = next;
    const double scale = std::max(1.0, std::abs(r));
    if (prev_step > 1e-9 * scale && step > 1e-9 * scale)
      rep.max_contraction_ratio = std::max(rep.max_contraction_ratio, step / prev_step);
    prev_step = step;
    if (step <= opts.tol * scale) {
      rep.convergence_iters = it;
      converged = true;
      break;
    }
  }
  if (!converged) throw NonConvergence("offset fixed point did not converge", prev_step);

  rep.r_oracle = r;
  rep.f_curve.reserve(opts.T_max);
  for (int T = 1; T <= opts.T_max; ++T) rep.f_curve.emplace_back(T, curve.f(T, r));
  rep.argmin = oracle_detail::minimize(curve, opts.T_max, r).first;
  rep.grid_capped = rep.argmin == opts.T_max;
  rep.strictly_decreasing = true;
  for (int k = 1; k < opts.T_max; ++k)
    if (!(rep.f_curve[k].second < rep.f_curve[k - 1].second)) rep.strictly_decreasing = false;
  if (rep.grid_capped && rep.strictly_decreasing) {
    rep.T_oracle = std::nullopt;
    rep.note = "grid-capped: no interior minimizer";
  } else {
    rep.T_oracle = rep.argmin;
    if (rep.grid_capped) rep.note = "grid-capped: minimizer on the grid boundary";
  }
  return rep;
}

/// min over the oracle grid of f(T; r) minus r, for an externally supplied r.
inline double fixed_point_residual(const PolicyInputs& in, double r, int T_max) {
  const auto curve = oracle_detail::build_curve(in, T_max);
  return oracle_detail::minimize(curve, T_max, r).second - r;
}

struct InnerDpResult {
  double closed_form = 0.0;
  double mc_mean = 0.0;
  double mc_std_error = 0.0;
  double gap = 0.0;  // |closed_form - mc_mean|
};

/// T-step open-loop problem with terminal value beta^T (x_T'P x_T + r + O):
/// closed-form optimal cost against a Monte Carlo estimate of the cost of the
/// optimal controls u_t = -(R + beta B'L B)^{-1} beta B'L A xhat_t,
/// L = L_{T-t-1}.
inline InnerDpResult inner_dp_check(const PolicyInputs& in, const Matrix& P, double r, int T,
                                    const Vector& x, int n_mc, std::uint64_t seed,
                                    unsigned threads = 0) {
  if (T < 1) throw std::invalid_argument("inner_dp_check requires T >= 1");
  if (n_mc < 2) throw std::invalid_argument("inner_dp_check needs at least two samples");
  const auto& sys = in.sys;
  const auto& cost = in.cost;
  const double beta = cost.beta;
  const auto rec = finite_riccati(P, T, sys, cost);

  InnerDpResult res;
  {
    const bool obs = in.propagation == ErrorPropagation::kObservabilityForm;
    const Matrix N = obs ? Matrix(sys.C.transpose() * sys.Sigma_S * sys.C)
                         : Matrix(sys.C * sys.Sigma_S * sys.C.transpose());
    const Eigen::Index q = sys.states();
    Matrix power = Matrix::Identity(q, q);
    Matrix Pt = Matrix::Zero(q, q);
    double sum = x.dot(rec.L[T] * x);
    for (int t = 0; t < T; ++t) {
      sum += std::pow(beta, t) * (Pt * rec.phi[t]).trace();
      Pt += obs ? Matrix(power.transpose() * N * power) : Matrix(power * N * power.transpose());
      power = sys.A * power;
    }
    for (int t = 1; t <= T; ++t)
      sum += std::pow(beta, t) * (sys.Sigma_S * sys.C.transpose() * rec.L[T - t] * sys.C).trace();
    sum += std::pow(beta, T) * (r + cost.O);
    res.closed_form = sum;
  }

  const Matrix factor = linalg::psd_sqrt(sys.Sigma_S);
  std::vector<double> samples(n_mc);
  detail::parallel_for(n_mc, threads, [&](int i) {
    GaussianSource noise = run_stream(seed, static_cast<std::uint64_t>(i));
    Vector xt = x;
    Vector xhat = x;
    double total = 0.0;
    double bt = 1.0;
    for (int t = 0; t < T; ++t) {
      const Vector u = -(rec.gains[t] * xhat);
      total += bt * (xt.dot(cost.Q * xt) + u.dot(cost.R * u));
      xhat = sys.A * xhat + sys.B * u;
      xt = sys.A * xt + sys.B * u + sys.C * (factor * noise.normal_vector(sys.states()));
      bt *= beta;
    }
    total += bt * (xt.dot(P * xt) + r + cost.O);
    samples[i] = total;
  });
  res.mc_mean = detail::pairwise_sum(samples) / n_mc;
  std::vector<double> sq(n_mc);
  for (int i = 0; i < n_mc; ++i) sq[i] = (samples[i] - res.mc_mean) * (samples[i] - res.mc_mean);
  res.mc_std_error = std::sqrt(detail::pairwise_sum(sq) / (n_mc - 1) / n_mc);
  res.gap = std::abs(res.closed_form - res.mc_mean);
  return res;
}

struct Perturbation {
  int period = 1;
  double gain_scale = 1.0;
};

struct ProbeEntry {
  Perturbation perturbation;
  double cost = 0.0;
};

struct ProbeResult {
  double baseline = 0.0;  // cost of (T*, K)
  double max_gain = 0.0;  // max over perturbations of baseline - cost
  std::vector<ProbeEntry> entries;
};

/// Exact expected discounted cost from x of measuring every T steps and
/// applying u = -Kg xhat in between (estimate rolled forward noiselessly).
/// Uses the plant's true error covariance A Cov A' + C Sigma_S C'. Returns
/// +inf when the strategy does not have finite cost.
inline double periodic_strategy_cost(const LinearSystem& sys, const CostModel& cost,
                                     const Vector& x, int T, const Matrix& Kg) {
  if (T < 1) throw std::invalid_argument("period must be >= 1");
  const Eigen::Index q = sys.states();
  const double beta = cost.beta;
  const Matrix closed = sys.A - sys.B * Kg;
  const Matrix stage = cost.Q + Kg.transpose() * cost.R * Kg;
  const Matrix noise = sys.C * sys.Sigma_S * sys.C.transpose();

  Matrix S = Matrix::Zero(q, q);
  Matrix Phi = Matrix::Identity(q, q);
  Matrix Cov = Matrix::Zero(q, q);
  double err = 0.0;
  double bt = 1.0;
  for (int j = 0; j < T; ++j) {
    S += bt * Phi.transpose() * stage * Phi;
    err += bt * (cost.Q * Cov).trace();
    Phi = closed * Phi;
    Cov = sys.A * Cov * sys.A.transpose() + noise;
    bt *= beta;
  }
  const Matrix M = std::sqrt(bt) * Phi;
  if (spectral_radius(M) >= 1.0) return std::numeric_limits<double>::infinity();

  // Pi = S + M' Pi M
  Matrix Pi = S;
  for (int it = 0; it < 1000000; ++it) {
    Matrix next = linalg::symmetrize(S + M.transpose() * Pi * M);
    const double d = linalg::sup_norm(next - Pi);
    Pi = std::move(next);
    if (d <= 1e-13 * std::max(1.0, linalg::sup_norm(Pi))) break;
  }
  const double offset = (err + bt * ((Pi * Cov).trace() + cost.O)) / (1.0 - bt);
  return x.dot(Pi * x) + offset;
}

inline std::vector<Perturbation> default_perturbations(int T_star) {
  std::vector<Perturbation> out;
  if (T_star > 1) out.push_back({T_star - 1, 1.0});
  out.push_back({T_star + 1, 1.0});
  out.push_back({T_star, 1.0 - 1e-3});
  out.push_back({T_star, 1.0 + 1e-3});
  return out;
}

/// Largest improvement any perturbed (period, gain) strategy achieves over
/// (T*, K) from x. Non-positive up to round-off when the policy is optimal.
inline ProbeResult policy_suboptimality_probe(const Problem& problem, const PolicySolution& ps,
                                              const std::vector<Perturbation>& perturbations) {
  if (!ps.T_star) throw InfinitePeriod("suboptimality probe needs a finite period");
  ProbeResult res;
  res.baseline =
      periodic_strategy_cost(problem.sys, problem.cost, problem.x0, *ps.T_star, ps.are().K);
  res.max_gain = -std::numeric_limits<double>::infinity();
  for (const auto& p : perturbations) {
    const double c = periodic_strategy_cost(problem.sys, problem.cost, problem.x0, p.period,
                                            p.gain_scale * ps.are().K);
    res.entries.push_back({p, c});
    res.max_gain = std::max(res.max_gain, res.baseline - c);
  }
  return res;
}

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerificationReport {
  OracleReport oracle;
  std::vector<Check> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

struct VerifyTolerances {
  double r_agreement = 1e-6;
  double fixed_point = 1e-8;
  double probe_gain = 1e-6;
  double contraction_slack = 1e-6;
};

/// Oracle-versus-analytic agreement for a solved policy.
inline VerificationReport verify_policy(const Problem& problem, const PolicySolution& ps,
                                        const VerifyTolerances& tol = {}) {
  VerificationReport rep;
  const int grid = ps.T_star ? default_oracle_grid(ps.T_star) : 500;
  rep.oracle = solve_r_fixed_point(ps.inputs, OracleOptions{grid});
  const auto& o = rep.oracle;
  auto add = [&rep](std::string name, bool ok, std::string detail) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  auto period_text = [](Period p) { return p ? std::to_string(*p) : std::string("inf"); };

  const bool same_period = ps.T_star ? (o.T_oracle && *o.T_oracle == *ps.T_star) : !o.T_oracle;
  add("period_agreement", same_period,
      "analytic " + period_text(ps.T_star) + ", oracle " + period_text(o.T_oracle) +
          (o.note.empty() ? "" : " (" + o.note + ")"));

  const double dr = std::abs(o.r_oracle - ps.r);
  add("offset_agreement", dr < tol.r_agreement, "|r_oracle - r| = " + format_double(dr));

  const double resid = std::abs(fixed_point_residual(ps.inputs, ps.r, grid));
  add("fixed_point_residual", resid < tol.fixed_point,
      "|min_T f(T; r) - r| = " + format_double(resid));

  if (ps.T_star) {
    const int T = *ps.T_star;
    const double hT = h_value(T, ps.r, ps.inputs);
    std::string detail = "h(T*) = " + format_double(hT);
    bool ok = hT > 0.0;
    if (T >= 2) {
      const double hprev = h_value(T - 1, ps.r, ps.inputs);
      ok = ok && hprev <= 0.0;
      detail = "h(T*-1) = " + format_double(hprev) + ", " + detail;
    }
    add("bracket", ok, detail);

    const auto probe = policy_suboptimality_probe(problem, ps, default_perturbations(T));
    add("suboptimality_probe", probe.max_gain <= tol.probe_gain,
        "max gain = " + format_double(probe.max_gain));
  }

  add("contraction", o.max_contraction_ratio <= ps.beta() + tol.contraction_slack,
      "max ratio = " + format_double(o.max_contraction_ratio));
  return rep;
}

}  // namespace lqgcm
