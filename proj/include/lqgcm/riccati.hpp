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
#include <string>
#include <vector>

#include "lqgcm/errors.hpp"
#include "lqgcm/propagation.hpp"
#include "lqgcm/system_model.hpp"

namespace lqgcm {

/// Fixed point of the discounted Riccati map with its gain and the
/// estimation-error sensitivity matrix.
struct AreSolution {
  Matrix P;    // q x q, symmetric PD
  Matrix K;    // p x q, u = -K x
  Matrix phi;  // q x q, A'PB beta (R + beta B'PB)^{-1} beta B'PA
  int iterations = 0;
  double residual = 0.0;
  std::vector<std::string> warnings;
};

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 100000;
};

namespace detail {

inline void require_square(const Matrix& m, Eigen::Index n, const char* name) {
  if (m.rows() != n || m.cols() != n)
    throw DimensionMismatch(std::string(name) + " must be " + std::to_string(n) +
                            " x " + std::to_string(n));
}

inline void require_compatible(const LinearSystem& sys, const CostModel& cost) {
  const Eigen::Index q = sys.states();
  require_square(sys.A, q, "A");
  if (sys.B.rows() != q) throw DimensionMismatch("B must have q rows");
  require_square(cost.Q, q, "Q");
  require_square(cost.R, sys.inputs(), "R");
}

/// (R + beta B'LB)^{-1} beta B'LA, via Cholesky.
inline Matrix gain(const Matrix& L, const LinearSystem& sys, const CostModel& cost) {
  const Matrix BtL = sys.B.transpose() * L;
  const Matrix S = cost.R + cost.beta * BtL * sys.B;
  Eigen::LLT<Matrix> llt(linalg::symmetrize(S));
  if (llt.info() != Eigen::Success)
    throw std::domain_error("R + beta B'LB is not positive definite");
  return llt.solve(cost.beta * BtL * sys.A);
}

/// A'LB beta K for a gain K computed from the same L.
inline Matrix sensitivity(const Matrix& L, const Matrix& K, const LinearSystem& sys,
                          double beta) {
  return linalg::symmetrize(sys.A.transpose() * L * sys.B * (beta * K));
}

}  // namespace detail

/// One backward Riccati step:
///   Q + beta A'LA - A'LB beta (R + beta B'LB)^{-1} beta B'LA
/// The result is symmetrized.
inline Matrix riccati_map(const Matrix& L, const LinearSystem& sys, const CostModel& cost) {
  detail::require_compatible(sys, cost);
  detail::require_square(L, sys.states(), "L");
  const Matrix K = detail::gain(L, sys, cost);
  const Matrix next = cost.Q + cost.beta * sys.A.transpose() * L * sys.A -
                      detail::sensitivity(L, K, sys, cost.beta);
  return linalg::symmetrize(next);
}

/// Value iteration on the Riccati map from L = Q until successive iterates
/// differ by less than tol in sup-norm. Controllability/observability
/// failures are reported as warnings and the iteration proceeds.
inline AreSolution dare_solve(const LinearSystem& sys, const CostModel& cost,
                              const DareOptions& opts = {}) {
  detail::require_compatible(sys, cost);
  AreSolution sol;
  if (!controllability_check(sys)) sol.warnings.emplace_back("(A, B) not controllable");
  if (!observability_check(sys, cost.Q)) sol.warnings.emplace_back("(A, J) not observable");

  Matrix L = linalg::symmetrize(cost.Q);
  double diff = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Matrix next = riccati_map(L, sys, cost);
    diff = linalg::sup_norm(next - L);
    L = std::move(next);
    if (!std::isfinite(diff)) break;
    if (diff < opts.tol) {
      sol.iterations = it;
      sol.P = L;
      sol.K = detail::gain(L, sys, cost);
      sol.phi = detail::sensitivity(L, sol.K, sys, cost.beta);
      sol.residual = linalg::sup_norm(riccati_map(L, sys, cost) - L);
      return sol;
    }
  }
  throw NonConvergence("Riccati value iteration did not converge", diff);
}

/// Backward recursion L_0 = P_terminal, L_{t+1} = riccati_map(L_t), with the
/// per-stage sensitivities phi_t and open-loop gains of the T-step problem.
struct FiniteRiccati {
  std::vector<Matrix> L;      // L_0 .. L_T
  std::vector<Matrix> phi;    // phi_0 .. phi_{T-1}, phi_t built from L_{T-t-1}
  std::vector<Matrix> gains;  // u_t = -gains[t] * xhat_t
};

inline FiniteRiccati finite_riccati(const Matrix& P_terminal, int T, const LinearSystem& sys,
                                    const CostModel& cost) {
  if (T < 1) throw std::invalid_argument("finite_riccati requires T >= 1");
  detail::require_compatible(sys, cost);
  detail::require_square(P_terminal, sys.states(), "P_terminal");
  FiniteRiccati out;
  out.L.reserve(T + 1);
  out.L.push_back(linalg::symmetrize(P_terminal));
  for (int t = 0; t < T; ++t) out.L.push_back(riccati_map(out.L.back(), sys, cost));
  for (int t = 0; t < T; ++t) {
    const Matrix& Lk = out.L[T - t - 1];
    Matrix K = detail::gain(Lk, sys, cost);
    out.phi.push_back(detail::sensitivity(Lk, K, sys, cost.beta));
    out.gains.push_back(std::move(K));
  }
  return out;
}

inline Vector eigenvalue_magnitudes(const Matrix& M) {
  if (!linalg::is_square(M)) throw DimensionMismatch("eigenvalues need a square matrix");
  if (M.size() == 0) return Vector();
  Eigen::EigenSolver<Matrix> es(M, false);
  Vector mags = es.eigenvalues().cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<>());
  return mags;
}

inline double spectral_radius(const Matrix& M) {
  const Vector mags = eigenvalue_magnitudes(M);
  return mags.size() == 0 ? 0.0 : mags(0);
}

inline constexpr double kStabilityMargin = 1e-9;

/// Solves W - A'WA = C'Sigma_S C (or W - AWA' = C Sigma_S C' for the
/// covariance form) by doubling: W <- W + A_k' W A_k, A_k <- A_k^2, which sums
/// the series over 2^k terms after k steps.
inline Matrix lyapunov_solve(const LinearSystem& sys,
                             ErrorPropagation prop = ErrorPropagation::kObservabilityForm) {
  const double rho = spectral_radius(sys.A);
  if (rho >= 1.0 - kStabilityMargin)
    throw UnstableA("Lyapunov solve needs a Schur-stable A", rho);

  const Matrix N = noise_term(sys, prop);
  Matrix W = N;
  Matrix Ak = sys.A;
  for (int k = 0; k < 200; ++k) {
    const Matrix inc = congruence(Ak, W, prop);
    W = linalg::symmetrize(W + inc);
    Ak = Ak * Ak;
    if (linalg::sup_norm(inc) <= 1e-17 * std::max(1.0, linalg::sup_norm(W)) ||
        linalg::sup_norm(Ak) == 0.0)
      break;
  }
  return W;
}

}  // namespace lqgcm
