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
#include <string>
#include <string_view>
#include <vector>

#include "lqgcm/linalg.hpp"

namespace lqgcm {

/// Plant x_{t+1} = A x_t + B u_t + C w_t with E[w w'] = Sigma_S. The
/// controller, when it measures, observes the full state.
struct LinearSystem {
  Matrix A;        // q x q
  Matrix B;        // q x p, p <= q
  Matrix C;        // q x q
  Matrix Sigma_S;  // q x q

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }

  /// C' Sigma_S C, the per-step noise injection into the error statistic.
  Matrix noise_gramian() const { return C.transpose() * Sigma_S * C; }
};

/// Stage cost x'Qx + u'Ru + i*O, discounted by beta.
struct CostModel {
  Matrix Q;
  Matrix R;
  double beta = 0.95;
  double O = 0.0;
};

struct Problem {
  LinearSystem sys;
  CostModel cost;
  Vector x0;
};

enum class ViolationCode {
  kNonFinite,
  kADimension,
  kBDimension,
  kTooManyInputs,
  kCDimension,
  kSigmaDimension,
  kSigmaNotPsd,
  kNoiseNotPd,
  kQDimension,
  kQNotPsd,
  kRDimension,
  kRNotPd,
  kBetaOutOfRange,
  kNegativeMeasurementCost,
  kX0Dimension,
};

inline std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::kNonFinite: return "NON_FINITE_ENTRY";
    case ViolationCode::kADimension: return "A_DIMENSION";
    case ViolationCode::kBDimension: return "B_DIMENSION";
    case ViolationCode::kTooManyInputs: return "INPUTS_EXCEED_STATES";
    case ViolationCode::kCDimension: return "C_DIMENSION";
    case ViolationCode::kSigmaDimension: return "SIGMA_DIMENSION";
    case ViolationCode::kSigmaNotPsd: return "SIGMA_NOT_PSD";
    case ViolationCode::kNoiseNotPd: return "NOISE_GRAMIAN_NOT_PD";
    case ViolationCode::kQDimension: return "Q_DIMENSION";
    case ViolationCode::kQNotPsd: return "Q_NOT_PSD";
    case ViolationCode::kRDimension: return "R_DIMENSION";
    case ViolationCode::kRNotPd: return "R_NOT_PD";
    case ViolationCode::kBetaOutOfRange: return "BETA_OUT_OF_RANGE";
    case ViolationCode::kNegativeMeasurementCost: return "NEGATIVE_MEASUREMENT_COST";
    case ViolationCode::kX0Dimension: return "X0_DIMENSION";
  }
  return "UNKNOWN";
}

struct Violation {
  ViolationCode code;
  std::string message;

  friend bool operator==(const Violation& a, const Violation& b) {
    return a.code == b.code && a.message == b.message;
  }
};

/// Every standing assumption that fails, in a fixed order. Empty means valid.
inline std::vector<Violation> validate(const Problem& p) {
  std::vector<Violation> out;
  auto add = [&out](ViolationCode c, std::string msg) {
    out.push_back({c, std::move(msg)});
  };
  const auto& s = p.sys;
  const auto& c = p.cost;

  const bool finite = s.A.allFinite() && s.B.allFinite() && s.C.allFinite() &&
                      s.Sigma_S.allFinite() && c.Q.allFinite() &&
                      c.R.allFinite() && p.x0.allFinite() &&
                      std::isfinite(c.beta) && std::isfinite(c.O);
  if (!finite) add(ViolationCode::kNonFinite, "non-finite entry in problem data");

  const Eigen::Index q = s.A.rows();
  const bool a_ok = q > 0 && s.A.cols() == q;
  if (!a_ok) add(ViolationCode::kADimension, "A must be square and non-empty");

  const bool b_ok = s.B.rows() == q && s.B.cols() > 0;
  if (!b_ok) add(ViolationCode::kBDimension, "B must have q rows and at least one column");
  if (b_ok && s.B.cols() > q) add(ViolationCode::kTooManyInputs, "B has more columns than states");

  const bool c_ok = s.C.rows() == q && s.C.cols() == q;
  if (!c_ok) add(ViolationCode::kCDimension, "C must be q x q");

  const bool sig_ok = s.Sigma_S.rows() == q && s.Sigma_S.cols() == q;
  if (!sig_ok) add(ViolationCode::kSigmaDimension, "Sigma_S must be q x q");

  if (sig_ok && finite && !linalg::is_psd(s.Sigma_S))
    add(ViolationCode::kSigmaNotPsd, "Sigma_S not symmetric positive semi-definite");
  if (sig_ok && c_ok && finite && !linalg::is_pd(s.noise_gramian()))
    add(ViolationCode::kNoiseNotPd, "C'Sigma_S C not positive definite");

  const bool q_ok = c.Q.rows() == q && c.Q.cols() == q;
  if (!q_ok) add(ViolationCode::kQDimension, "Q must be q x q");
  if (q_ok && finite && !linalg::is_psd(c.Q))
    add(ViolationCode::kQNotPsd, "Q not symmetric positive semi-definite");

  const Eigen::Index pdim = s.B.cols();
  const bool r_ok = c.R.rows() == pdim && c.R.cols() == pdim && pdim > 0;
  if (!r_ok) add(ViolationCode::kRDimension, "R must be p x p");
  if (r_ok && finite && !linalg::is_pd(c.R))
    add(ViolationCode::kRNotPd, "R not positive definite");

  if (!(c.beta > 0.0 && c.beta < 1.0))
    add(ViolationCode::kBetaOutOfRange, "beta must lie in (0, 1)");
  if (!(c.O >= 0.0))
    add(ViolationCode::kNegativeMeasurementCost, "measurement cost O must be >= 0");

  if (p.x0.size() != q) add(ViolationCode::kX0Dimension, "x0 must have q entries");
  return out;
}

/// J with Q = J'J (symmetric PSD square root).
inline Matrix state_weight_factor(const Matrix& Q) { return linalg::psd_sqrt(Q); }

/// rank [B AB ... A^{q-1}B] == q
inline bool controllability_check(const LinearSystem& sys) {
  const Eigen::Index q = sys.states();
  const Eigen::Index p = sys.inputs();
  Matrix ctrb(q, q * p);
  Matrix block = sys.B;
  for (Eigen::Index k = 0; k < q; ++k) {
    ctrb.middleCols(k * p, p) = block;
    block = sys.A * block;
  }
  return linalg::numerical_rank(ctrb) == q;
}

/// Observability of (A, J) where Q = J'J.
inline bool observability_check(const LinearSystem& sys, const Matrix& Q) {
  const Matrix J = state_weight_factor(Q);
  const Eigen::Index q = sys.states();
  Matrix obsv(q * J.rows(), q);
  Matrix block = J;
  for (Eigen::Index k = 0; k < q; ++k) {
    obsv.middleRows(k * J.rows(), J.rows()) = block;
    block = block * sys.A;
  }
  return linalg::numerical_rank(obsv) == q;
}

}  // namespace lqgcm
