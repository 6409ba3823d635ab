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

// Shared problem data and generators for the test suites.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "lqgcm/lqgcm.hpp"

namespace lqgcm::testing {

inline Matrix sys1_A() {
  Matrix A(3, 3);
  A << -0.61, 0.53, 1.3, -1.15, -0.03, -0.96, -0.78, 0.24, -0.02;
  return A;
}

inline Matrix sys2_A() {
  Matrix A(3, 3);
  A << -0.61, 0.53, 0.3, -0.95, -0.03, -0.56, -0.78, 0.24, -0.02;
  return A;
}

inline Matrix shared_B() {
  Matrix B(3, 2);
  B << 0.12, -0.55, 0.86, 0.08, 1.16, -0.60;
  return B;
}

inline Problem example_problem(const Matrix& A, double O, double sigma = 0.08) {
  Problem p;
  p.sys.A = A;
  p.sys.B = shared_B();
  p.sys.C = Matrix::Identity(3, 3);
  p.sys.Sigma_S = sigma * Matrix::Identity(3, 3);
  p.cost.Q = 0.1 * Matrix::Identity(3, 3);
  p.cost.R = 0.2 * Matrix::Identity(2, 2);
  p.cost.beta = 0.95;
  p.cost.O = O;
  p.x0 = Vector(3);
  p.x0 << 20, -15, 10;
  return p;
}

inline Problem sys1(double O = 10.0) { return example_problem(sys1_A(), O); }
inline Problem sys2(double O = 7.0) { return example_problem(sys2_A(), O); }

inline PolicySolution solve(const Problem& p, PolicyOptions opts = {}) {
  return optimal_period(p.sys, p.cost, opts);
}

inline std::string config_path(const std::string& name) {
  return std::string(LQGCM_CONFIG_DIR) + "/" + name;
}

/// Random admissible problems with q <= 3 for property tests.
class ProblemGenerator {
 public:
  explicit ProblemGenerator(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Matrix matrix(Eigen::Index r, Eigen::Index c, double scale) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(-scale, scale);
    return m;
  }

  /// Symmetric PD matrix with eigenvalues bounded below by `floor`.
  Matrix spd(Eigen::Index n, double floor) {
    const Matrix G = matrix(n, n, 1.0);
    return linalg::symmetrize(G * G.transpose() + floor * Matrix::Identity(n, n));
  }

  Problem problem(int max_states = 3) {
    const int q = integer(1, max_states);
    const int p = integer(1, q);
    Problem pr;
    pr.sys.A = matrix(q, q, 1.0);
    pr.sys.B = matrix(q, p, 1.0);
    pr.sys.C = Matrix::Identity(q, q) + matrix(q, q, 0.2);
    pr.sys.Sigma_S = spd(q, 0.05) * 0.1;
    pr.cost.Q = spd(q, 0.05) * 0.3;
    pr.cost.R = spd(p, 0.1) * 0.3;
    pr.cost.beta = uniform(0.8, 0.99);
    pr.cost.O = 0.0;
    pr.x0 = matrix(q, 1, 5.0);
    return pr;
  }

  /// A problem whose optimal period is finite and at least 2, by drawing O
  /// between the measure-every-step bound and a multiple of it.
  std::pair<Problem, PolicySolution> finite_period_problem(int max_states = 3) {
    for (;;) {
      Problem pr = problem(max_states);
      if (!validate(pr).empty()) continue;
      PolicyOptions opts;
      const PolicySolution base = optimal_period(pr.sys, pr.cost, opts);
      const double floor = (base.inputs.noise() * base.are().phi).trace();
      if (!(floor > 1e-6)) continue;
      pr.cost.O = floor * std::exp(uniform(std::log(1.5), std::log(40.0)));  // log-uniform
      PolicySolution ps = with_measurement_cost(base, pr.cost.O, opts.max_period);
      if (!ps.T_star || *ps.T_star > 60) continue;
      return {pr, ps};
    }
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace lqgcm::testing
