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
// Fixed-radius release curves.
//
//   transmit:  X(t) = 1 - sum_n a_n exp(-lambda_n t),   a_n = 6/(pi^2 n^2),
//              lambda_n = D~ n^2 pi^2 / R^(2-omega)
//   channel:   H(t) = 1 - sum_m c_m exp(-mu_m t),        c_m = 8/(pi^2 (2m-1)^2),
//              mu_m = D_o ((2m-1) pi / (2a))^2
//   cascade:   r(t) = int_0^t x(tau) H(t - tau) dtau
//            = 1 - sum_n a_n e^{-lambda_n t}
//                - sum_{n,m} a_n c_m lambda_n (e^{-lambda_n t} - e^{-mu_m t}) / (mu_m - lambda_n)
#pragma once

#include <functional>
#include <span>

#include "mprelease/types.hpp"

namespace mprelease {

double effective_diffusion(double d_hat, double r_norm, double omega);

// lambda_1 [1/h] and mu_1 [1/h].
double transmit_decay_rate(const TransportParams& params);
double channel_decay_rate(const TransportParams& params);

double transmit_cumulative(double t, const TransportParams& params, const TruncationPolicy& trunc = {});
double transmit_rate(double t, const TransportParams& params, const TruncationPolicy& trunc = {});
double channel_cumulative(double t, const TransportParams& params, const TruncationPolicy& trunc = {});
double channel_rate(double t, const TransportParams& params, const TruncationPolicy& trunc = {});
double end_to_end_release(double t, const TransportParams& params, const TruncationPolicy& trunc = {});

// Channel survival 1 - H(t), accurate when H is close to 1.
double channel_survival(double t, const TransportParams& params, const TruncationPolicy& trunc = {});

// Evaluates `kernel` at each grid time.
TimeSeries sample_curve(const std::function<double(double)>& kernel, const Eigen::VectorXd& grid);

// Independent numerical check of end_to_end_release on a uniform grid
// starting at or after trunc.t_min (see convolve_cumulative).
TimeSeries convolution_oracle(const TransportParams& params, const TruncationPolicy& trunc,
                              const Eigen::VectorXd& grid);

// Cumulative release of a cascade whose stages have cumulative curves F and G,
// r(t_k) = int_0^{t_k} G(t_k - tau) dF(tau), by product integration on the
// cells [0, t_0], [t_0, t_1], ... . Within a cell F is linear in sqrt(tau) and
// G linear in sqrt(t_k - tau); the cell integral of that interpolant is exact.
// Error is O(h^1.5) for rates with a t^{-1/2} start. The grid must be uniform.
TimeSeries convolve_cumulative(const std::function<double(double)>& first_cumulative,
                               const std::function<double(double)>& second_cumulative,
                               const Eigen::VectorXd& grid);

namespace series {

// Dimensionless building blocks; s = lambda_1 t or s = mu_1 t.

// sum_{n>=1} exp(-n^2 s)
double sphere_theta(double s, const TruncationPolicy& trunc);
// 1 - (6/pi^2) sum_{n>=1} exp(-n^2 s)/n^2
double sphere_cumulative(double s, const TruncationPolicy& trunc);
// (6/pi^2) sum_{n>=1} exp(-n^2 s)/n^2
double sphere_survival(double s, const TruncationPolicy& trunc);
// sum_{k odd} exp(-k^2 s)
double slab_theta(double s, const TruncationPolicy& trunc);
// 1 - (8/pi^2) sum_{k odd} exp(-k^2 s)/k^2
double slab_cumulative(double s, const TruncationPolicy& trunc);
double slab_survival(double s, const TruncationPolicy& trunc);

// r(t) of the sphere/slab cascade as a function of s = lambda_1 t and
// sigma = mu_1 t only.
double cascade_cumulative(double s, double sigma, const TruncationPolicy& trunc);

// Cascade of two exponential mixtures with weights summing to 1:
// 1 - sum_n p_n e^{-l_n t} - sum_{n,m} p_n q_m l_n g(l_n, m_m, t).
double mixture_cascade(std::span<const double> tx_weights, std::span<const double> tx_rates,
                       std::span<const double> ch_weights, std::span<const double> ch_rates, double t);

// (e^{-l t} - e^{-m t}) / (m - l), with the limit t e^{-l t} when
// |m - l| < 1e-12 max(l, m).
double exp_difference_quotient(double l, double m, double t);

}  // namespace series
}  // namespace mprelease
