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
// Both the mean and the variance are built from
//   B_n(X) = e^{-lambda_n t} + int_0^t lambda_n e^{-lambda_n tau} S(t - tau) dtau,
// where S = 1 - H is the channel survival, so that r(t) = 1 - sum_n a_n B_n.
// The channel mode sums collapse into S, and the Gamma expectations are
//   E[e^{-cX}]       = (1 + c/zeta)^{-gamma}
//   E[X e^{-cX}]     = (gamma/zeta) (1 + c/zeta)^{-gamma-1}
//   E[X^2 e^{-cX}]   = (gamma(gamma+1)/zeta^2) (1 + c/zeta)^{-gamma-2}.
#include "mprelease/size_statistics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mprelease/errors.hpp"
#include "mprelease/parallel.hpp"
#include "mprelease/release_kernels.hpp"

namespace mprelease {

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void require_shape_above(const GammaRateParams& gp, double order) {
  const double bound = order / gp.omega_tilde();
  if (!(gp.gamma > bound)) {
    throw InfeasibleError("gamma = " + fmt(gp.gamma) + " violates gamma > " + fmt(order) + "/(2-omega) = " + fmt(bound) +
                          " (omega = " + fmt(gp.omega) + ")");
  }
}

void check_consistent_omega(const GammaRateParams& gp, const TransportParams& tp) {
  if (std::abs(gp.omega - tp.omega) > 1e-12) throw DomainError("Gamma parameters and transport parameters disagree on omega");
}

// Bernoulli polynomials B_2 .. B_8 at a, minus their values at 0.
std::array<double, 7> bernoulli_shift(double a) {
  const double a2 = a * a, a3 = a2 * a, a4 = a3 * a, a5 = a4 * a, a6 = a5 * a, a7 = a6 * a, a8 = a7 * a;
  return {a2 - a,
          a3 - 1.5 * a2 + 0.5 * a,
          a4 - 2.0 * a3 + a2,
          a5 - 2.5 * a4 + 5.0 / 3.0 * a3 - a / 6.0,
          a6 - 3.0 * a5 + 2.5 * a4 - 0.5 * a2,
          a7 - 3.5 * a6 + 3.5 * a5 - 7.0 / 6.0 * a3 + a / 6.0,
          a8 - 4.0 * a7 + 14.0 / 3.0 * a6 - 7.0 / 3.0 * a4 + 2.0 / 3.0 * a2};
}

// sum_{k=2}^{8} (-1)^k (B_k(a) - B_k(0)) / (k (k-1) x^{k-1})
double stirling_shift_series(double x, double a) {
  const auto b = bernoulli_shift(a);
  double sum = 0.0;
  double xp = x;
  for (int k = 2; k <= 8; ++k) {
    sum += ((k % 2) ? -1.0 : 1.0) * b[k - 2] / (k * (k - 1) * xp);
    xp *= x;
  }
  return sum;
}

bool use_asymptotic(double x, double a) { return x >= 1e3 * std::max(1.0, a * a); }

}  // namespace

namespace detail {

double log_gamma_shift(double x, double a) {
  if (use_asymptotic(x, a)) return a * std::log(x) + stirling_shift_series(x, a);
  return std::lgamma(x + a) - std::lgamma(x);
}

double log_moment_ratio(double gamma, double omega_tilde) {
  const double a1 = -1.0 / omega_tilde;
  const double a2 = -2.0 / omega_tilde;
  if (use_asymptotic(gamma, a2)) {
    // The logarithmic terms cancel exactly.
    return stirling_shift_series(gamma, a2) - 2.0 * stirling_shift_series(gamma, a1);
  }
  return std::lgamma(gamma) + std::lgamma(gamma + a2) - 2.0 * std::lgamma(gamma + a1);
}

}  // namespace detail

void GammaRateParams::validate() const {
  if (!(std::isfinite(gamma) && gamma > 0.0)) throw DomainError("gamma must be finite and > 0");
  if (!(std::isfinite(zeta) && zeta > 0.0)) throw DomainError("zeta must be finite and > 0");
  if (!(omega >= 0.0 && omega < 2.0)) throw DomainError("omega must satisfy 0 <= omega < 2");
}

double radius_pdf(double x, const GammaRateParams& gp) {
  gp.validate();
  if (!(x > 0.0)) throw DomainError("radius_pdf: x must be > 0");
  const double wt = gp.omega_tilde();
  const double log_f = std::log(wt) + gp.gamma * std::log(gp.zeta) - std::lgamma(gp.gamma) -
                       (wt * gp.gamma + 1.0) * std::log(x) - gp.zeta * std::pow(x, -wt);
  return std::exp(log_f);
}

SizeMoments radius_moments(const GammaRateParams& gp) {
  gp.validate();
  require_shape_above(gp, 2.0);
  const double wt = gp.omega_tilde();
  const double mu = std::exp(detail::log_gamma_shift(gp.gamma, -1.0 / wt) + std::log(gp.zeta) / wt);
  const double cv2 = std::expm1(detail::log_moment_ratio(gp.gamma, wt));
  return {mu, mu * std::sqrt(std::max(cv2, 0.0))};
}

GammaRateParams solve_gamma_params(const SizeMoments& m, double omega) {
  if (!(std::isfinite(m.mu_R) && m.mu_R > 0.0)) throw DomainError("mu_R must be finite and > 0");
  if (!(std::isfinite(m.sigma_R) && m.sigma_R >= 0.0)) throw DomainError("sigma_R must be finite and >= 0");
  if (!(omega >= 0.0 && omega < 2.0)) throw DomainError("omega must satisfy 0 <= omega < 2");
  if (m.sigma_R == 0.0)
    throw DegenerateDistributionError("sigma_R = 0: no Gamma shape reproduces a fixed radius; use the fixed-radius model");
  const double wt = 2.0 - omega;
  const double pole = 2.0 / wt;
  const double target = std::log1p((m.sigma_R / m.mu_R) * (m.sigma_R / m.mu_R));
  // The moment ratio decreases from +inf at gamma = 2/(2-omega) to 1 as
  // gamma grows, so the root is bracketed in d = gamma - pole.
  auto excess = [&](double d) { return detail::log_moment_ratio(pole + d, wt) - target; };
  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (excess(lo) <= 0.0) {
    lo *= 0.5;
    if (++guard > 1100) throw ConvergenceError("solve_gamma_params: could not bracket the shape from below");
  }
  guard = 0;
  while (excess(hi) > 0.0) {
    hi *= 2.0;
    if (++guard > 1100) throw ConvergenceError("solve_gamma_params: could not bracket the shape from above");
  }
  if (hi == lo) hi = 2.0 * lo;
  bool converged = false;
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = hi / lo > 4.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      converged = true;
      break;
    }
    (excess(mid) > 0.0 ? lo : hi) = mid;
    if (hi - lo <= 4e-16 * (pole + hi)) {
      converged = true;
      break;
    }
  }
  if (!converged) throw ConvergenceError("solve_gamma_params: bisection did not converge");
  GammaRateParams gp;
  gp.omega = omega;
  gp.gamma = pole + 0.5 * (lo + hi);
  gp.zeta = std::exp(wt * (std::log(m.mu_R) - detail::log_gamma_shift(gp.gamma, -1.0 / wt)));
  return gp;
}

namespace {

struct StatGrid {
  Eigen::ArrayXd tau;       // nodes on [0, t]
  Eigen::ArrayXd weighted;  // w_i S(t - tau_i)
  Eigen::ArrayXd excess;    // w_i (S(t - tau_i) - S(t))
  double survival_t = 1.0;  // S(t)
};

StatGrid build_grid(double t, const TransportParams& tp, const TruncationPolicy& trunc, const QuadratureSpec& quad) {
  const QuadratureRule rule = composite_rule(0.0, t, quad, Grading::both);
  StatGrid g;
  g.tau = rule.nodes.array();
  g.weighted.resize(g.tau.size());
  const double mu1 = channel_decay_rate(tp);
  for (Eigen::Index i = 0; i < g.tau.size(); ++i)
    g.weighted(i) = rule.weights(i) * series::slab_survival(mu1 * (t - g.tau(i)), trunc);
  g.survival_t = series::slab_survival(mu1 * t, trunc);
  g.excess = g.weighted - rule.weights.array() * g.survival_t;
  return g;
}

// E[B_n] for rho_n = kappa_n / zeta.
double expected_b(double rho, double t, double gamma, const StatGrid& g) {
  const double a = std::exp(-gamma * std::log1p(rho * t));
  const double integral = (g.weighted * (-(gamma + 1.0) * (rho * g.tau).log1p()).exp()).sum();
  return a + gamma * rho * integral;
}

// Same value with S(t) taken out of the integral in closed form. The rest
// vanishes at tau = 0, where (1 + rho tau)^{-gamma-1} is sharpest for large n.
double expected_b_excess(double rho, double t, double gamma, const StatGrid& g) {
  const double a = std::exp(-gamma * std::log1p(rho * t));
  const double integral = (g.excess * (-(gamma + 1.0) * (rho * g.tau).log1p()).exp()).sum();
  return a + (1.0 - a) * g.survival_t + gamma * rho * integral;
}

void check_inputs(double t, const GammaRateParams& gp, const TransportParams& tp, const TruncationPolicy& trunc,
                  const QuadratureSpec& quad) {
  gp.validate();
  tp.validate();
  trunc.validate();
  quad.validate();
  check_consistent_omega(gp, tp);
  if (!(std::isfinite(t) && t >= 0.0)) throw DomainError("t must be finite and >= 0");
}

}  // namespace

double mean_release(double t, const GammaRateParams& gp, const TransportParams& tp, const TruncationPolicy& trunc,
                    const QuadratureSpec& quad) {
  check_inputs(t, gp, tp, trunc, quad);
  require_shape_above(gp, 1.0);
  if (t == 0.0) return 0.0;
  const StatGrid g = build_grid(t, tp, trunc, quad);
  const double rho1 = tp.d_hat * kPi2 / gp.zeta;
  double sum = 0.0;
  double weight_used = 0.0;
  double excess = 0.0;
  int last = 0;
  for (int n = 1; n <= trunc.max_terms; ++n) {
    const double a_n = 6.0 / (kPi2 * double(n) * n);
    const double b = expected_b_excess(rho1 * double(n) * n, t, gp.gamma, g);
    sum += a_n * b;
    weight_used += a_n;
    excess = b - g.survival_t;
    last = n;
    // B_n decreases to S(t); the remaining excess is about n a_n (B_n - S(t)) / 3.
    if (n >= 4 && n * a_n * std::abs(excess) < 3.0 * trunc.tail_tol) break;
  }
  // For large n, B_n - S(t) ~ |S'(t)| E[1/lambda_n] ~ 1/n^2, so the rest is
  // (6/pi^2) excess N^2 sum_{n>N} n^-4, summed by Euler-Maclaurin.
  const double big_n = last;
  const double quartic_tail = 1.0 / (3.0 * std::pow(big_n, 3)) - 1.0 / (2.0 * std::pow(big_n, 4)) +
                              1.0 / (3.0 * std::pow(big_n, 5));
  sum += (1.0 - weight_used) * g.survival_t + 6.0 / kPi2 * excess * big_n * big_n * quartic_tail;
  return std::clamp(1.0 - sum, 0.0, 1.0);
}

namespace {

double variance_unchecked(double t, const GammaRateParams& gp, const TransportParams& tp,
                          const TruncationPolicy& trunc, const QuadratureSpec& quad) {
  const StatGrid g = build_grid(t, tp, trunc, quad);
  const int terms = std::min(trunc.variance_terms, trunc.max_terms);
  const double gamma = gp.gamma;
  const double rho1 = tp.d_hat * kPi2 / gp.zeta;
  Eigen::ArrayXd a(terms), rho(terms);
  for (int n = 0; n < terms; ++n) {
    a(n) = 6.0 / (kPi2 * double(n + 1) * (n + 1));
    rho(n) = rho1 * double(n + 1) * (n + 1);
  }

  double mean_s = 0.0;
  for (int n = 0; n < terms; ++n) mean_s += a(n) * expected_b(rho(n), t, gamma, g);

  // E[e^{-(lambda_n + lambda_l) t}]
  double s_aa = 0.0;
  // E[e^{-lambda_l t} int lambda_n e^{-lambda_n tau} S(t - tau) dtau]
  double s_ab = 0.0;
  for (int n = 0; n < terms; ++n) {
    for (int l = 0; l < terms; ++l) {
      s_aa += a(n) * a(l) * std::exp(-gamma * std::log1p((rho(n) + rho(l)) * t));
      const double inner =
          (g.weighted * (-(gamma + 1.0) * (rho(l) * t + rho(n) * g.tau).log1p()).exp()).sum();
      s_ab += a(n) * a(l) * gamma * rho(n) * inner;
    }
  }

  // Double integral over [0, t]^2, symmetric under (n, i) <-> (l, j).
  std::vector<double> pair_sums(terms, 0.0);
  parallel_for(static_cast<std::size_t>(terms), [&](std::size_t idx) {
    const int n = static_cast<int>(idx);
    double acc = 0.0;
    Eigen::ArrayXd row(g.tau.size());
    for (int l = n; l < terms; ++l) {
      const Eigen::ArrayXd shifted = rho(l) * g.tau;
      double block = 0.0;
      for (Eigen::Index i = 0; i < g.tau.size(); ++i) {
        row = (-(gamma + 2.0) * (rho(n) * g.tau(i) + shifted).log1p()).exp();
        block += g.weighted(i) * (row * g.weighted).sum();
      }
      acc += (l == n ? 1.0 : 2.0) * a(n) * a(l) * rho(n) * rho(l) * block;
    }
    pair_sums[idx] = acc;
  });
  double s_cc = 0.0;
  for (double v : pair_sums) s_cc += v;
  s_cc *= gamma * (gamma + 1.0);

  const double var = s_aa + 2.0 * s_ab + s_cc - mean_s * mean_s;
  if (var < -1e-8) throw ConvergenceError("variance_release: negative variance " + fmt(var) + "; increase quadrature nodes");
  return std::max(var, 0.0);
}

}  // namespace

double variance_release(double t, const GammaRateParams& gp, const TransportParams& tp, const TruncationPolicy& trunc,
                        const QuadratureSpec& quad) {
  check_inputs(t, gp, tp, trunc, quad);
  require_shape_above(gp, 2.0);
  if (t == 0.0) return 0.0;
  return variance_unchecked(t, gp, tp, trunc, quad);
}

CheckedVariance variance_release_checked(double t, const GammaRateParams& gp, const TransportParams& tp,
                                         const TruncationPolicy& trunc, const QuadratureSpec& quad) {
  CheckedVariance out;
  out.variance = variance_release(t, gp, tp, trunc, quad);
  if (t == 0.0) return out;
  out.doubled = variance_unchecked(t, gp, tp, trunc, quad.doubled());
  const double scale = std::max(std::abs(out.doubled), 1e-300);
  out.relative_shift = std::abs(out.doubled - out.variance) / scale;
  out.stable = out.relative_shift <= 0.01 || std::abs(out.doubled - out.variance) <= 1e-12;
  return out;
}

}  // namespace mprelease
