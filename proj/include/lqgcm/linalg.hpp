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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace lqgcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Relative eigenvalue threshold for all definiteness decisions.
inline constexpr double kDefinitenessTol = 1e-10;

/// Largest absolute entry.
inline double sup_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_square(const Matrix& m) { return m.rows() == m.cols(); }

inline bool is_symmetric(const Matrix& m, double tol = 1e-10) {
  if (!is_square(m)) return false;
  return sup_norm(m - m.transpose()) <= tol * std::max(1.0, sup_norm(m));
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline Vector sym_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// Thresholds are relative to the largest eigenvalue magnitude; an all-zero
// matrix is PSD but not PD.
inline bool is_psd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  if (m.size() == 0) return true;
  const Vector ev = sym_eigenvalues(m);
  const double scale = ev.cwiseAbs().maxCoeff();
  return ev.minCoeff() >= -kDefinitenessTol * scale;
}

inline bool is_pd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  if (m.size() == 0) return false;
  const Vector ev = sym_eigenvalues(m);
  const double scale = ev.cwiseAbs().maxCoeff();
  return scale > 0.0 && ev.minCoeff() > kDefinitenessTol * scale;
}

/// Symmetric PSD square root S with S*S = m. Negative eigenvalues from
/// round-off are clamped to zero.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector sv = svd.singularValues();
  const double cutoff = kDefinitenessTol * std::max(1.0, sv(0));
  return (sv.array() > cutoff).count();
}

/// Minimum eigenvalue of the symmetric part; used for PSD-order checks.
inline double min_sym_eigenvalue(const Matrix& m) {
  return sym_eigenvalues(m).minCoeff();
}

}  // namespace linalg
}  // namespace lqgcm
