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
//
// Release statistics over random particle radii. The decay rate variable
// X = R^{-(2-omega)} is Gamma(gamma, rate zeta); lambda_n = D~ n^2 pi^2 X.
#pragma once

#include "mprelease/quadrature.hpp"
#include "mprelease/types.hpp"

namespace mprelease {

struct GammaRateParams {
  double gamma = 0.0;
  double zeta = 0.0;
  double omega = 0.0;

  void validate() const;
  // 2 - omega
  double omega_tilde() const { return 2.0 - omega; }
};

// Moments of the normalized radius.
struct SizeMoments {
  double mu_R = 0.0;
  double sigma_R = 0.0;
};

double radius_pdf(double x, const GammaRateParams& gp);
SizeMoments radius_moments(const GammaRateParams& gp);
GammaRateParams solve_gamma_params(const SizeMoments& m, double omega);

// Expected cumulative release E[r(t; R)]. tp.r_norm is ignored.
double mean_release(double t, const GammaRateParams& gp, const TransportParams& tp,
                    const TruncationPolicy& trunc = {}, const QuadratureSpec& quad = {});

// Var[r(t; R)]. tp.r_norm is ignored.
double variance_release(double t, const GammaRateParams& gp, const TransportParams& tp,
                        const TruncationPolicy& trunc = {}, const QuadratureSpec& quad = QuadratureSpec::nested());

struct CheckedVariance {
  double variance = 0.0;
  double doubled = 0.0;         // same quantity with twice the nodes per panel
  double relative_shift = 0.0;  // |doubled - variance| / doubled
  bool stable = true;           // relative_shift <= 1%
};

// variance_release plus the node-doubling stability check.
CheckedVariance variance_release_checked(double t, const GammaRateParams& gp, const TransportParams& tp,
                                         const TruncationPolicy& trunc = {},
                                         const QuadratureSpec& quad = QuadratureSpec::nested());

namespace detail {
// ln Gamma(x + a) - ln Gamma(x), accurate for large x.
double log_gamma_shift(double x, double a);
// ln(E[R^2] / E[R]^2) as a function of the shape and 2 - omega.
double log_moment_ratio(double gamma, double omega_tilde);
}  // namespace detail

}  // namespace mprelease
