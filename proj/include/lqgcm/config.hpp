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

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lqgcm/propagation.hpp"
#include "lqgcm/system_model.hpp"

namespace lqgcm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem file: JSON object with row-major matrices
///   {"A": [[...], ...], "B": ..., "C": ..., "Sigma_S": ...,
///    "Q": ..., "R": ..., "beta": 0.95, "O": 10, "x0": [...],
///    "name": "...", "propagation": "observability" | "covariance"}
/// "name", "O" (default 0) and "propagation" are optional.
struct ProblemFile {
  std::string name;
  Problem problem;
  ErrorPropagation propagation = ErrorPropagation::kObservabilityForm;
};

namespace config_detail {

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError(key + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) throw ConfigError(key + ": rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(key + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw ConfigError(key + ": non-numeric entry");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError(key + ": expected a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(key + ": non-numeric entry");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key: ") + key);
  return j.at(key);
}

}  // namespace config_detail

inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline ProblemFile problem_from_json(const nlohmann::json& j) {
  using config_detail::require;
  if (!j.is_object()) throw ConfigError("problem file must be a JSON object");
  ProblemFile f;
  f.name = j.value("name", std::string());
  auto& p = f.problem;
  p.sys.A = config_detail::matrix_from_json(require(j, "A"), "A");
  p.sys.B = config_detail::matrix_from_json(require(j, "B"), "B");
  p.sys.C = config_detail::matrix_from_json(require(j, "C"), "C");
  p.sys.Sigma_S = config_detail::matrix_from_json(require(j, "Sigma_S"), "Sigma_S");
  p.cost.Q = config_detail::matrix_from_json(require(j, "Q"), "Q");
  p.cost.R = config_detail::matrix_from_json(require(j, "R"), "R");
  const auto& beta = require(j, "beta");
  if (!beta.is_number()) throw ConfigError("beta: expected a number");
  p.cost.beta = beta.get<double>();
  if (j.contains("O")) {
    if (!j.at("O").is_number()) throw ConfigError("O: expected a number");
    p.cost.O = j.at("O").get<double>();
  }
  p.x0 = config_detail::vector_from_json(require(j, "x0"), "x0");
  if (j.contains("propagation")) {
    const auto parsed = parse_propagation(j.at("propagation").get<std::string>());
    if (!parsed) throw ConfigError("propagation: expected \"observability\" or \"covariance\"");
    f.propagation = *parsed;
  }
  return f;
}

inline nlohmann::json problem_to_json(const ProblemFile& f) {
  const auto& p = f.problem;
  nlohmann::json j;
  if (!f.name.empty()) j["name"] = f.name;
  j["A"] = to_json(p.sys.A);
  j["B"] = to_json(p.sys.B);
  j["C"] = to_json(p.sys.C);
  j["Sigma_S"] = to_json(p.sys.Sigma_S);
  j["Q"] = to_json(p.cost.Q);
  j["R"] = to_json(p.cost.R);
  j["beta"] = p.cost.beta;
  j["O"] = p.cost.O;
  j["x0"] = to_json(p.x0);
  j["propagation"] = std::string(to_string(f.propagation));
  return j;
}

inline ProblemFile parse_problem(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  try {
    return problem_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad problem file: ") + e.what());
  }
}

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problem file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

}  // namespace lqgcm
