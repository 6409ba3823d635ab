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
#include <string_view>

#include "lqgcm/system_model.hpp"

namespace lqgcm {

/// How the no-measurement error statistic grows between measurements.
///
/// kObservabilityForm is the recursion P <- A'PA + C'Sigma_S C used throughout
/// the optimal-period characterization; it reproduces the published period
/// tables and the never-measure threshold. kCovarianceForm is the actual
/// error covariance of the plant, P <- APA' + C Sigma_S C'. The two coincide
/// when A is normal and C'Sigma_S C = C Sigma_S C' is a multiple of I.
enum class ErrorPropagation { kObservabilityForm, kCovarianceForm };

inline std::string_view to_string(ErrorPropagation p) {
  return p == ErrorPropagation::kObservabilityForm ? "observability" : "covariance";
}

inline std::optional<ErrorPropagation> parse_propagation(std::string_view s) {
  if (s == "observability") return ErrorPropagation::kObservabilityForm;
  if (s == "covariance") return ErrorPropagation::kCovarianceForm;
  return std::nullopt;
}

/// Per-step noise injection for the chosen form.
inline Matrix noise_term(const LinearSystem& sys, ErrorPropagation p) {
  return p == ErrorPropagation::kObservabilityForm
             ? Matrix(sys.C.transpose() * sys.Sigma_S * sys.C)
             : Matrix(sys.C * sys.Sigma_S * sys.C.transpose());
}

/// A'XA or AXA'.
inline Matrix congruence(const Matrix& A, const Matrix& X, ErrorPropagation p) {
  return p == ErrorPropagation::kObservabilityForm
             ? Matrix(A.transpose() * X * A)
             : Matrix(A * X * A.transpose());
}

}  // namespace lqgcm
