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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lqgcm/controller.hpp"
#include "lqgcm/format.hpp"
#include "lqgcm/measurement_policy.hpp"
#include "lqgcm/random.hpp"

namespace lqgcm {

enum class StrategyKind { kOptimal, kAlwaysMeasure, kNeverMeasure, kFixedPeriod };

/// Measurement schedule used by the simulator. Controls are always -K x_bar.
struct Strategy {
  StrategyKind kind = StrategyKind::kOptimal;
  int period = 0;  // kFixedPeriod only

  static Strategy optimal() { return {}; }
  static Strategy always() { return {StrategyKind::kAlwaysMeasure, 1}; }
  static Strategy never() { return {StrategyKind::kNeverMeasure, 0}; }
  static Strategy fixed(int T) { return {StrategyKind::kFixedPeriod, T}; }

  std::string name() const {
    switch (kind) {
      case StrategyKind::kOptimal: return "optimal";
      case StrategyKind::kAlwaysMeasure: return "always";
      case StrategyKind::kNeverMeasure: return "never";
      case StrategyKind::kFixedPeriod: return "fixed:" + std::to_string(period);
    }
    return "unknown";
  }
};

/// "optimal", "always", "never" or "fixed:<T>" with T >= 1.
inline std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "optimal") return Strategy::optimal();
  if (s == "always") return Strategy::always();
  if (s == "never") return Strategy::never();
  constexpr std::string_view prefix = "fixed:";
  if (s.substr(0, prefix.size()) == prefix) {
    const auto digits = s.substr(prefix.size());
    int T = 0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), T);
    if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() && T >= 1)
      return Strategy::fixed(T);
  }
  return std::nullopt;
}

struct SimConfig {
  int horizon = 500;
  std::uint64_t seed = 1;
  int n_runs = 1;
  Strategy strategy;
  /// Drops the process noise entirely (test mode).
  bool noiseless = false;
  /// 0 picks hardware concurrency.
  unsigned threads = 0;
};

struct TrajectoryStep {
  long t = 0;
  Vector x;
  Vector x_bar;
  Vector err;
  Vector u;
  bool measured = false;
  double stage_cost = 0.0;  // beta^t (x'Qx + u'Ru + i O)
  double cum_cost = 0.0;    // prefix sum of stage_cost
};

struct TrajectoryRecord {
  std::vector<TrajectoryStep> steps;
  double control_cost = 0.0;      // discounted x'Qx + u'Ru
  double measurement_cost = 0.0;  // discounted i O
  int measurements = 0;

  double total_cost() const { return control_cost + measurement_cost; }
};

namespace detail {

inline bool schedule_says_measure(const Strategy& s, const ControllerSession& session) {
  const auto& st = session.state();
  if (st.t == 0) return false;
  switch (s.kind) {
    case StrategyKind::kOptimal: return session.measurement_due();
    case StrategyKind::kAlwaysMeasure: return true;
    case StrategyKind::kNeverMeasure: return false;
    case StrategyKind::kFixedPeriod: return st.m + 1 >= s.period;
  }
  return false;
}

struct RunTotals {
  double control = 0.0;
  double measurement = 0.0;
  int measurements = 0;
};

/// One closed-loop run of horizon H. on_step(t, x, x_bar, u, measured,
/// control_stage, measurement_stage) sees every step before the plant moves.
template <typename OnStep>
RunTotals run_closed_loop(const Problem& problem, const PolicySolution& ps, const Strategy& strategy,
                          int horizon, GaussianSource& noise, bool noiseless,
                          const Matrix& noise_factor, OnStep&& on_step) {
  const auto& sys = problem.sys;
  const auto& cost = problem.cost;
  ControllerSession session(ps, problem.x0);
  Vector x = problem.x0;
  RunTotals totals;
  double bt = 1.0;
  for (int t = 0; t < horizon; ++t) {
    const bool measure = schedule_says_measure(strategy, session);
    std::optional<Vector> y;
    if (measure) y = x;
    auto [measured, u] = session.step_with_decision(measure, y);
    const double ctrl = bt * (x.dot(cost.Q * x) + u.dot(cost.R * u));
    const double meas = measured ? bt * cost.O : 0.0;
    totals.control += ctrl;
    totals.measurement += meas;
    totals.measurements += measured ? 1 : 0;
    on_step(t, x, session.state().x_bar, u, measured, ctrl, meas);
    Vector next = propagate_estimate(sys, x, u);
    if (!noiseless) next.noalias() += sys.C * (noise_factor * noise.normal_vector(sys.states()));
    x = std::move(next);
    bt *= cost.beta;
  }
  return totals;
}

/// Pairwise (cascade) summation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const auto half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Runs body(i) for i in [0, n) across threads; body must only write slot i.
template <typename Body>
void parallel_for(int n, unsigned threads, Body&& body) {
  unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  hw = std::min<unsigned>(hw, static_cast<unsigned>(std::max(1, n)));
  if (hw <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(hw);
  for (unsigned w = 0; w < hw; ++w)
    pool.emplace_back([&, w] {
      for (int i = static_cast<int>(w); i < n; i += static_cast<int>(hw)) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Seeded closed loop of x_{t+1} = A x_t + B u_t + C w_t, w_t ~ N(0, Sigma_S),
/// under the chosen measurement schedule. Uses run 0 of cfg.seed.
inline TrajectoryRecord simulate(const Problem& problem, const PolicySolution& ps,
                                 const SimConfig& cfg, std::uint64_t run = 0) {
  if (cfg.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  TrajectoryRecord rec;
  rec.steps.reserve(cfg.horizon);
  GaussianSource noise = run_stream(cfg.seed, run);
  const Matrix factor = linalg::psd_sqrt(problem.sys.Sigma_S);
  double cum = 0.0;
  const auto totals = detail::run_closed_loop(
      problem, ps, cfg.strategy, cfg.horizon, noise, cfg.noiseless, factor,
      [&](int t, const Vector& x, const Vector& xb, const Vector& u, bool measured, double ctrl,
          double meas) {
        TrajectoryStep s;
        s.t = t;
        s.x = x;
        s.x_bar = xb;
        s.err = x - xb;
        s.u = u;
        s.measured = measured;
        s.stage_cost = ctrl + meas;
        cum += s.stage_cost;
        s.cum_cost = cum;
        rec.steps.push_back(std::move(s));
      });
  rec.control_cost = totals.control;
  rec.measurement_cost = totals.measurement;
  rec.measurements = totals.measurements;
  return rec;
}

/// Same plant and noise as simulate(), driven by chaining make_packet at
/// every measurement epoch instead of the online controller.
inline TrajectoryRecord simulate_packet_chain(const Problem& problem, const PolicySolution& ps,
                                              const SimConfig& cfg, std::uint64_t run = 0) {
  if (cfg.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const auto& sys = problem.sys;
  const auto& cost = problem.cost;
  GaussianSource noise = run_stream(cfg.seed, run);
  const Matrix factor = linalg::psd_sqrt(sys.Sigma_S);
  TrajectoryRecord rec;
  Vector x = problem.x0;
  ControlPacket pkt = make_packet(x, ps, cfg.horizon);
  int j = 0;
  Vector xhat = x;
  double bt = 1.0, cum = 0.0;
  for (int t = 0; t < cfg.horizon; ++t) {
    bool measured = false;
    if (t > 0 && j == pkt.T) {
      measured = true;
      pkt = make_packet(x, ps, cfg.horizon);
      j = 0;
      xhat = x;
    }
    const Vector u = pkt.controls[j++];
    TrajectoryStep s;
    s.t = t;
    s.x = x;
    s.x_bar = xhat;
    s.err = x - xhat;
    s.u = u;
    s.measured = measured;
    const double ctrl = bt * (x.dot(cost.Q * x) + u.dot(cost.R * u));
    const double meas = measured ? bt * cost.O : 0.0;
    s.stage_cost = ctrl + meas;
    cum += s.stage_cost;
    s.cum_cost = cum;
    rec.control_cost += ctrl;
    rec.measurement_cost += meas;
    rec.measurements += measured ? 1 : 0;
    rec.steps.push_back(std::move(s));
    xhat = propagate_estimate(sys, xhat, u);
    Vector next = propagate_estimate(sys, x, u);
    if (!cfg.noiseless) next.noalias() += sys.C * (factor * noise.normal_vector(sys.states()));
    x = std::move(next);
    bt *= cost.beta;
  }
  return rec;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int runs = 0;
  int horizon = 0;
};

/// Horizon long enough that beta^H < 1e-3, so the truncated tail is below
/// 0.1% of a stationary value.
inline int monte_carlo_horizon(double beta, int requested) {
  const int needed = static_cast<int>(std::ceil(std::log(1e-3) / std::log(beta)));
  return std::max(requested, needed);
}

/// Mean total discounted cost over n_runs independent runs (substream
/// seed + run index) and its standard error.
inline MonteCarloEstimate monte_carlo_value(const Problem& problem, const PolicySolution& ps,
                                            const SimConfig& cfg) {
  if (cfg.n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");
  const int H = monte_carlo_horizon(problem.cost.beta, cfg.horizon);
  const Matrix factor = linalg::psd_sqrt(problem.sys.Sigma_S);
  std::vector<double> totals(cfg.n_runs);
  detail::parallel_for(cfg.n_runs, cfg.threads, [&](int i) {
    GaussianSource noise = run_stream(cfg.seed, static_cast<std::uint64_t>(i));
    const auto t = detail::run_closed_loop(problem, ps, cfg.strategy, H, noise, cfg.noiseless,
                                           factor, [](auto&&...) {});
    totals[i] = t.control + t.measurement;
  });
  MonteCarloEstimate est;
  est.runs = cfg.n_runs;
  est.horizon = H;
  est.mean = detail::pairwise_sum(totals) / cfg.n_runs;
  if (cfg.n_runs > 1) {
    std::vector<double> sq(cfg.n_runs);
    for (int i = 0; i < cfg.n_runs; ++i) sq[i] = (totals[i] - est.mean) * (totals[i] - est.mean);
    const double var = detail::pairwise_sum(sq) / (cfg.n_runs - 1);
    est.std_error = std::sqrt(var / cfg.n_runs);
  }
  return est;
}

/// Sample covariance of x_t - x_bar_t across runs at step t.
inline Matrix empirical_error_covariance(const Problem& problem, const PolicySolution& ps,
                                         const SimConfig& cfg, int t) {
  if (t < 0) throw std::invalid_argument("t must be >= 0");
  const Eigen::Index q = problem.sys.states();
  const Matrix factor = linalg::psd_sqrt(problem.sys.Sigma_S);
  std::vector<Vector> errs(cfg.n_runs);
  detail::parallel_for(cfg.n_runs, cfg.threads, [&](int i) {
    GaussianSource noise = run_stream(cfg.seed, static_cast<std::uint64_t>(i));
    detail::run_closed_loop(problem, ps, cfg.strategy, t + 1, noise, cfg.noiseless, factor,
                            [&](int s, const Vector& x, const Vector& xb, auto&&...) {
                              if (s == t) errs[i] = x - xb;
                            });
  });
  Vector mean = Vector::Zero(q);
  for (const auto& e : errs) mean += e;
  mean /= static_cast<double>(cfg.n_runs);
  Matrix cov = Matrix::Zero(q, q);
  for (const auto& e : errs) cov.noalias() += (e - mean) * (e - mean).transpose();
  if (cfg.n_runs > 1) cov /= static_cast<double>(cfg.n_runs - 1);
  return cov;
}

struct PropagationComparison {
  Matrix observability_form;
  Matrix covariance_form;
  double observability_distance = 0.0;  // sup-norm distance to the sample
  double covariance_distance = 0.0;
  ErrorPropagation closer = ErrorPropagation::kObservabilityForm;
};

/// Compares a sample error covariance taken t steps after a measurement with
/// both propagation forms.
inline PropagationComparison compare_propagation(const Matrix& sample, const LinearSystem& sys,
                                                 int t) {
  PropagationComparison c;
  c.observability_form = error_cov_seq(sys, t, ErrorPropagation::kObservabilityForm).P.back();
  c.covariance_form = error_cov_seq(sys, t, ErrorPropagation::kCovarianceForm).P.back();
  c.observability_distance = linalg::sup_norm(sample - c.observability_form);
  c.covariance_distance = linalg::sup_norm(sample - c.covariance_form);
  c.closer = c.covariance_distance < c.observability_distance ? ErrorPropagation::kCovarianceForm
                                                              : ErrorPropagation::kObservabilityForm;
  return c;
}

/// CSV: t, x_1..x_q, xbar_1..xbar_q, err_1..err_q, u_1..u_p, i, stage_cost,
/// cum_cost.
inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
  if (rec.steps.empty()) return;
  const auto q = rec.steps.front().x.size();
  const auto p = rec.steps.front().u.size();
  os << "t";
  for (const char* prefix : {"x_", "xbar_", "err_"})
    for (Eigen::Index k = 1; k <= q; ++k) os << ',' << prefix << k;
  for (Eigen::Index k = 1; k <= p; ++k) os << ",u_" << k;
  os << ",i,stage_cost,cum_cost\n";
  for (const auto& s : rec.steps) {
    os << s.t;
    for (const Vector* v : {&s.x, &s.x_bar, &s.err, &s.u})
      for (Eigen::Index k = 0; k < v->size(); ++k) os << ',' << format_double((*v)(k));
    os << ',' << (s.measured ? 1 : 0) << ',' << format_double(s.stage_cost) << ','
       << format_double(s.cum_cost) << '\n';
  }
}

}  // namespace lqgcm
