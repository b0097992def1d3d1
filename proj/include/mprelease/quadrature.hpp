// Copyright 2026 The mprelease Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Core>

#include "mprelease/errors.hpp"

namespace mprelease {

// Composite Gauss-Legendre layout. The interval is cut into `panels` equal
// panels; with grading the end panels are further split geometrically
// (ratio 1/2, `grading_levels` times) toward the graded endpoint.
struct QuadratureSpec {
  int nodes_per_panel = 64;
  int panels = 4;
  int grading_levels = 12;

  void validate() const;
  // Layout used for the double integrals of the release variance.
  static QuadratureSpec nested() { return {16, 4, 12}; }
  // Same layout with twice the nodes per panel.
  QuadratureSpec doubled() const { return {2 * nodes_per_panel, panels, grading_levels}; }
};

enum class Grading { none, lower, upper, both };

template <typename Scalar>
struct GaussLegendre {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;    // ascending, in (-1, 1)
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;  // sum to 2
};

// n-point rule on [-1, 1] by Newton iteration on the Legendre recurrence.
template <typename Scalar = double>
GaussLegendre<Scalar> gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: need at least one node");
  GaussLegendre<Scalar> rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      Scalar p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const Scalar p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const Scalar dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) <= 2 * eps) break;
    }
    // Refresh the derivative at the converged root.
    Scalar p0 = 1, p1 = x;
    for (int j = 2; j <= n; ++j) {
      const Scalar p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1);
    const Scalar w = 2 / ((1 - x * x) * dp * dp);
    rule.nodes(i) = -x;
    rule.nodes(n - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0;
  return rule;
}

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

QuadratureRule composite_rule(double lower, double upper, const QuadratureSpec& spec,
                              Grading grading = Grading::none);

// Composite rule with both endpoints graded. Exact for polynomials of degree
// below 2 * nodes_per_panel.
template <typename F>
double integrate_composite_gl(F&& f, double lower, double upper, const QuadratureSpec& spec = {}) {
  if (!(lower <= upper)) throw DomainError("integrate_composite_gl: lower bound exceeds upper bound");
  if (lower == upper) return 0.0;
  const QuadratureRule rule = composite_rule(lower, upper, spec, Grading::both);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) sum += rule.weights(i) * f(rule.nodes(i));
  return sum;
}

}  // namespace mprelease
