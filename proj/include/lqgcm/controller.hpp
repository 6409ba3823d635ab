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

#include <optional>
#include <vector>

#include "lqgcm/errors.hpp"
#include "lqgcm/measurement_policy.hpp"

namespace lqgcm {

/// Waiting time until the next measurement and the open-loop controls to
/// apply meanwhile.
struct ControlPacket {
  int T = 0;
  std::vector<Vector> controls;
};

/// Noiseless estimate propagation xhat <- A xhat + B u. Both controller
/// implementations go through this so their arithmetic is identical.
inline Vector propagate_estimate(const LinearSystem& sys, const Vector& xhat, const Vector& u) {
  Vector next = sys.A * xhat;
  next.noalias() += sys.B * u;
  return next;
}

inline Vector feedback(const Matrix& K, const Vector& xhat) { return -(K * xhat); }

/// Packet (T*, -Kx, -K(A-BK)x, ..., -K(A-BK)^{T*-1}x) for a measured state x.
/// The controls are generated by rolling the estimate forward, which is the
/// same sequence as the matrix-power form. A never-measure policy needs an
/// explicit horizon cap.
inline ControlPacket make_packet(const Vector& x, const PolicySolution& ps,
                                 std::optional<int> horizon_cap = std::nullopt) {
  int T = 0;
  if (ps.T_star) {
    T = *ps.T_star;
  } else if (horizon_cap && *horizon_cap >= 1) {
    T = *horizon_cap;
  } else {
    throw InfinitePeriod("never-measure policy has no finite packet; supply a horizon cap");
  }
  const auto& sys = ps.sys();
  const Matrix& K = ps.are().K;
  ControlPacket pkt;
  pkt.T = T;
  pkt.controls.reserve(T);
  Vector xhat = x;
  for (int j = 0; j < T; ++j) {
    pkt.controls.push_back(feedback(K, xhat));
    xhat = propagate_estimate(sys, xhat, pkt.controls.back());
  }
  return pkt;
}

/// -K (A - BK)^j x for j < T, computed with explicit matrix powers.
inline std::vector<Vector> packet_controls_matrix_power(const Vector& x, const PolicySolution& ps,
                                                        int T) {
  const auto& sys = ps.sys();
  const Matrix& K = ps.are().K;
  const Matrix closed = sys.A - sys.B * K;
  std::vector<Vector> out;
  Matrix power = Matrix::Identity(sys.states(), sys.states());
  for (int j = 0; j < T; ++j) {
    out.push_back(-K * power * x);
    power = power * closed;
  }
  return out;
}

/// Recursive sufficient statistic of the online controller.
///
/// m is the number of steps since the last measurement, P_bar the surrogate
/// covariance sum_{j<m} (1 - beta^{j+1})/(1 - beta) G_j with
/// G_j = (A')^j C'Sigma_S C A^j, and x_bar the estimate. next_increment
/// caches G_m and beta_pow caches beta^{m+1} so each step costs O(1) matrix
/// products.
struct ControllerState {
  int m = 0;
  Matrix P_bar;
  Vector x_bar;
  long t = 0;
  Matrix next_increment;
  double beta_pow = 0.0;
};

inline ControllerState initial_controller_state(const Vector& x0, const PolicySolution& ps) {
  const Eigen::Index q = ps.sys().states();
  ControllerState s;
  s.P_bar = Matrix::Zero(q, q);
  s.x_bar = x0;
  s.next_increment = ps.inputs.noise();
  s.beta_pow = ps.beta();
  return s;
}

/// P_bar + (1 - beta^{m+1})/(1 - beta) G_m
inline Matrix candidate_surrogate(const ControllerState& s, const PolicySolution& ps) {
  return s.P_bar + (1.0 - s.beta_pow) / (1.0 - ps.beta()) * s.next_increment;
}

/// Tr(candidate_surrogate * phi); the measurement fires when this exceeds O.
inline double trigger_value(const ControllerState& s, const PolicySolution& ps) {
  return (candidate_surrogate(s, ps) * ps.are().phi).trace();
}

/// t = 0 is never a measurement step (x0 is known). Ties wait.
inline bool measurement_due(const ControllerState& s, const PolicySolution& ps) {
  if (s.t == 0 || ps.case_id == PolicyCase::kNeverMeasure) return false;
  return trigger_value(s, ps) > ps.O();
}

struct StepResult {
  bool measured = false;
  Vector u;
  ControllerState state;
};

/// Advances the statistic with an externally made measurement decision.
/// measurement must be present when measure is true.
inline StepResult advance_controller(const ControllerState& s, const PolicySolution& ps,
                                     const Vector& prev_control, bool measure,
                                     const std::optional<Vector>& measurement) {
  const auto& sys = ps.sys();
  StepResult out;
  out.state = s;
  ControllerState& n = out.state;
  if (s.t == 0) {
    out.u = feedback(ps.are().K, n.x_bar);
    n.t = 1;
    return out;
  }
  if (measure) {
    if (!measurement) throw MeasurementUnavailable("measurement requested but none supplied");
    n.m = 0;
    n.P_bar.setZero();
    n.x_bar = *measurement;
    n.next_increment = ps.inputs.noise();
    n.beta_pow = ps.beta();
  } else {
    n.P_bar = candidate_surrogate(s, ps);
    n.m = s.m + 1;
    n.next_increment = congruence(sys.A, s.next_increment, ps.inputs.propagation);
    n.beta_pow = s.beta_pow * ps.beta();
    n.x_bar = propagate_estimate(sys, s.x_bar, prev_control);
  }
  out.measured = measure;
  out.u = feedback(ps.are().K, n.x_bar);
  n.t = s.t + 1;
  return out;
}

/// One step of the optimal online controller: trace trigger for i_t, then
/// u_t = -K x_bar_t.
inline StepResult step_decide(const ControllerState& s, const std::optional<Vector>& measurement,
                              const PolicySolution& ps, const Vector& prev_control) {
  const bool due = measurement_due(s, ps);
  if (due && !measurement)
    throw MeasurementUnavailable("trigger fired at t=" + std::to_string(s.t) +
                                 " but no measurement was supplied");
  return advance_controller(s, ps, prev_control, due, measurement);
}

/// Single-threaded controller session that remembers its previous control.
class ControllerSession {
 public:
  ControllerSession(PolicySolution ps, const Vector& x0)
      : ps_(std::move(ps)), state_(initial_controller_state(x0, ps_)),
        prev_u_(Vector::Zero(ps_.sys().inputs())) {}

  bool measurement_due() const { return lqgcm::measurement_due(state_, ps_); }

  /// Optimal step; returns (i_t, u_t).
  std::pair<bool, Vector> step(const std::optional<Vector>& measurement) {
    return commit(step_decide(state_, measurement, ps_, prev_u_));
  }

  /// Step with the measurement decision made by the caller.
  std::pair<bool, Vector> step_with_decision(bool measure, const std::optional<Vector>& measurement) {
    return commit(advance_controller(state_, ps_, prev_u_, measure, measurement));
  }

  const ControllerState& state() const { return state_; }
  const PolicySolution& policy() const { return ps_; }

 private:
  std::pair<bool, Vector> commit(StepResult r) {
    state_ = std::move(r.state);
    prev_u_ = r.u;
    return {r.measured, std::move(r.u)};
  }

  PolicySolution ps_;
  ControllerState state_;
  Vector prev_u_;
};

}  // namespace lqgcm
