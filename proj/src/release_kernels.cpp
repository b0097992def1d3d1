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
#include "mprelease/release_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mprelease/errors.hpp"
#include "mprelease/quadrature.hpp"

namespace mprelease {

using std::numbers::pi;

namespace {

constexpr double kPi2 = pi * pi;
constexpr double kInvSqrtPi = 0.56418958354775628695;
// Direct series below these dimensionless times need too many terms; the
// Poisson-dual (small-time) forms take over.
constexpr double kSphereSwitch = 1.0;
constexpr double kSlabSwitch = 0.5;
// Distance, in index units, kept between the explicit sums and the poles
// of the Euler-Maclaurin tail corrections.
constexpr double kPoleMargin = 16.0;

void require_finite_positive(double v, const char* field) {
  if (!(std::isfinite(v) && v > 0.0)) throw DomainError(std::string(field) + " must be finite and > 0");
}

// Integrated complementary error function.
double ierfc(double x) { return std::exp(-x * x) * kInvSqrtPi - x * std::erfc(x); }

bool negligible(double term, double sum, const TruncationPolicy& trunc) {
  return term == 0.0 || std::abs(term) < trunc.tail_tol * std::abs(sum);
}

// sum_{j>=0} 1/((a+j)^2 - z2) for a - sqrt(z2) >= kPoleMargin.
double tail_inverse_quadratic(double z2, double a) {
  const double z = std::sqrt(z2);
  const double x = z / a;
  const double integral = x < 1e-4 ? (1.0 + x * x / 3.0 + x * x * x * x / 5.0) / a : std::atanh(x) / z;
  const double u = a * a - z2;
  const double f = 1.0 / u;
  const double f1 = -2.0 * a / (u * u);
  const double f3 = -24.0 * a * (a * a + z2) / (u * u * u * u);
  return integral + 0.5 * f - f1 / 12.0 + f3 / 720.0;
}

// sum_{j>=0} 1/(k^2 (k^2 - y)) with k = a + 2j, for a - sqrt(y) >= kPoleMargin.
double tail_inverse_quartic_odd(double y, double a) {
  constexpr double h = 2.0;
  const double q = y / (a * a);
  double integral;
  if (q < 0.1) {
    integral = 0.0;
    double qj = 1.0;
    for (int j = 0; j < 40; ++j) {
      integral += qj / (2 * j + 3);
      qj *= q;
      if (qj < 1e-18) break;
    }
    integral /= a * a * a;
  } else {
    const double r = std::sqrt(y);
    integral = (std::atanh(r / a) / r - 1.0 / a) / y;
  }
  const double k = a;
  const double g = k * k * k * k - y * k * k;
  const double g1 = 4.0 * k * k * k - 2.0 * y * k;
  const double g2 = 12.0 * k * k - 2.0 * y;
  const double g3 = 24.0 * k;
  const double f = 1.0 / g;
  const double f1 = -g1 / (g * g);
  const double f3 = -g3 / (g * g) + 6.0 * g1 * g2 / (g * g * g) - 6.0 * g1 * g1 * g1 / (g * g * g * g);
  return integral / h + 0.5 * f - h / 12.0 * f1 + h * h * h / 720.0 * f3;
}

// r as the integral of x(tau) H(1 - tau) over [0, 1] in units where t = 1.
// Used when the series would need more than max_terms indices.
double cascade_by_quadrature(double s, double sigma, const TruncationPolicy& trunc) {
  static const QuadratureRule rule = composite_rule(0.0, 1.0, QuadratureSpec{16, 1, 40}, Grading::lower);
  const double scale = 6.0 * s / kPi2;
  double total = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double u = rule.nodes(i);
    const double half_u2 = 0.5 * u * u;
    // tau = u^2/2 covers [0, 1/2]; 1 - tau = u^2/2 covers [1/2, 1].
    const double head = series::sphere_theta(s * half_u2, trunc) * series::slab_cumulative(sigma * (1.0 - half_u2), trunc);
    const double tail = series::sphere_theta(s * (1.0 - half_u2), trunc) * series::slab_cumulative(sigma * half_u2, trunc);
    total += rule.weights(i) * u * (head + tail);
  }
  return std::clamp(scale * total, 0.0, 1.0);
}

}  // namespace

void TransportParams::validate() const {
  require_finite_positive(a, "a_mm");
  require_finite_positive(d_hat, "d_hat");
  require_finite_positive(d_out, "d_out");
  require_finite_positive(r_norm, "r_norm");
  if (!(std::isfinite(omega) && omega >= 0.0 && omega < 2.0)) throw DomainError("omega must satisfy 0 <= omega < 2");
}

void TruncationPolicy::validate() const {
  if (max_terms < 1) throw DomainError("max_terms must be >= 1");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw DomainError("tail_tol must be in (0, 1)");
  if (!(std::isfinite(t_min) && t_min > 0.0)) throw DomainError("t_min must be > 0");
  if (variance_terms < 1) throw DomainError("variance_terms must be >= 1");
}

double TruncationPolicy::exponent_cutoff() const { return std::log(1.0 / tail_tol) + 10.0; }

void validate_time_grid(const Eigen::VectorXd& grid) {
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(grid(k)) || grid(k) < 0.0) throw DomainError("time grid: times must be finite and >= 0");
    if (k > 0 && !(grid(k) > grid(k - 1))) throw DomainError("time grid: times must be strictly increasing");
  }
}

void TimeSeries::validate() const {
  if (times.size() != values.size()) throw DomainError("time series: times and values differ in length");
  validate_time_grid(times);
}

double effective_diffusion(double d_hat, double r_norm, double omega) {
  require_finite_positive(d_hat, "d_hat");
  require_finite_positive(r_norm, "r_norm");
  if (!(omega >= 0.0 && omega < 2.0)) throw DomainError("omega must satisfy 0 <= omega < 2");
  return d_hat * std::pow(r_norm, omega);
}

double transmit_decay_rate(const TransportParams& p) {
  p.validate();
  return p.d_hat * kPi2 * std::pow(p.r_norm, p.omega - 2.0);
}

double channel_decay_rate(const TransportParams& p) {
  p.validate();
  return p.d_out * kPi2 / (4.0 * p.a * p.a);
}

namespace series {

double sphere_theta(double s, const TruncationPolicy& trunc) {
  if (s >= kSphereSwitch) {
    double sum = 0.0;
    for (int n = 1; n <= trunc.max_terms; ++n) {
      const double term = std::exp(-double(n) * n * s);
      sum += term;
      if (negligible(term, sum, trunc)) break;
    }
    return sum;
  }
  const double root = std::sqrt(pi / s);
  double sum = 0.0;
  for (int k = 1; k <= trunc.max_terms; ++k) {
    const double term = std::exp(-kPi2 * k * k / s);
    sum += term;
    if (negligible(term, 0.5, trunc)) break;
  }
  return 0.5 * (root - 1.0) + root * sum;
}

double sphere_survival(double s, const TruncationPolicy& trunc) {
  if (s <= 0.0) return 1.0;
  if (s >= kSphereSwitch) {
    double sum = 0.0;
    for (int n = 1; n <= trunc.max_terms; ++n) {
      const double term = std::exp(-double(n) * n * s) / (double(n) * n);
      sum += term;
      if (negligible(term, sum, trunc)) break;
    }
    return 6.0 / kPi2 * sum;
  }
  return 1.0 - sphere_cumulative(s, trunc);
}

double sphere_cumulative(double s, const TruncationPolicy& trunc) {
  if (s <= 0.0) return 0.0;
  if (s >= kSphereSwitch) return 1.0 - sphere_survival(s, trunc);
  const double tau = s / kPi2;
  const double rt = std::sqrt(tau);
  double sum = 0.0;
  for (int k = 1; k <= trunc.max_terms; ++k) {
    const double term = ierfc(k / rt);
    sum += term;
    if (negligible(term, kInvSqrtPi, trunc)) break;
  }
  return 6.0 * rt * (kInvSqrtPi + 2.0 * sum) - 3.0 * tau;
}

double slab_theta(double s, const TruncationPolicy& trunc) {
  if (s >= kSlabSwitch) {
    double sum = 0.0;
    for (int m = 1; m <= trunc.max_terms; ++m) {
      const double k = 2.0 * m - 1.0;
      const double term = std::exp(-k * k * s);
      sum += term;
      if (negligible(term, sum, trunc)) break;
    }
    return sum;
  }
  double sum = 0.0;
  for (int k = 1; k <= trunc.max_terms; ++k) {
    const double term = (k % 2 ? -1.0 : 1.0) * std::exp(-kPi2 * k * k / (4.0 * s));
    sum += term;
    if (negligible(term, 0.5, trunc)) break;
  }
  return 0.25 * std::sqrt(pi / s) * (1.0 + 2.0 * sum);
}

double slab_survival(double s, const TruncationPolicy& trunc) {
  if (s <= 0.0) return 1.0;
  if (s >= kSlabSwitch) {
    double sum = 0.0;
    for (int m = 1; m <= trunc.max_terms; ++m) {
      const double k = 2.0 * m - 1.0;
      const double term = std::exp(-k * k * s) / (k * k);
      sum += term;
      if (negligible(term, sum, trunc)) break;
    }
    return 8.0 / kPi2 * sum;
  }
  return 1.0 - slab_cumulative(s, trunc);
}

double slab_cumulative(double s, const TruncationPolicy& trunc) {
  if (s <= 0.0) return 0.0;
  if (s >= kSlabSwitch) return 1.0 - slab_survival(s, trunc);
  const double rt = std::sqrt(4.0 * s / kPi2);
  double sum = 0.0;
  for (int k = 1; k <= trunc.max_terms; ++k) {
    const double term = (k % 2 ? -1.0 : 1.0) * ierfc(k / rt);
    sum += term;
    if (negligible(term, kInvSqrtPi, trunc)) break;
  }
  return 2.0 * rt * (kInvSqrtPi + 2.0 * sum);
}

double exp_difference_quotient(double l, double m, double t) {
  const double d = m - l;
  if (std::abs(d) < 1e-12 * std::max(l, m)) return t * std::exp(-l * t);
  const double lo = std::min(l, m);
  const double ad = std::abs(d);
  return std::exp(-lo * t) * -std::expm1(-ad * t) / ad;
}

double cascade_cumulative(double s, double sigma, const TruncationPolicy& trunc) {
  if (s <= 0.0 || sigma <= 0.0) return 0.0;
  const double cutoff = trunc.exponent_cutoff();
  // Transmit indices n with n^2 s <= cutoff and channel modes m with
  // (2m-1)^2 sigma <= cutoff carry non-negligible exponentials.
  const double n_scale = std::sqrt(cutoff / s);
  const double k_scale = std::sqrt(cutoff / sigma);
  const auto m_live = static_cast<long>(std::floor((k_scale + 1.0) / 2.0));
  const auto n_last = static_cast<long>(std::ceil(n_scale + kPoleMargin));
  const auto m_cap = static_cast<long>(std::ceil((k_scale + kPoleMargin + 1.0) / 2.0));
  if (n_last > trunc.max_terms || m_cap > trunc.max_terms) return cascade_by_quadrature(s, sigma, trunc);

  std::vector<double> mu(m_cap + 1), decay(m_cap + 1), weight(m_cap + 1);
  for (long m = 1; m <= m_cap; ++m) {
    const double k = 2.0 * m - 1.0;
    mu[m] = k * k * sigma;
    decay[m] = std::exp(-mu[m]);
    weight[m] = 8.0 / (kPi2 * k * k);
  }

  // a_n lambda_n is the same for every n.
  const double a_lambda = 6.0 * s / kPi2;
  double survival = 0.0;
  double cross = 0.0;
  for (long n = 1; n <= n_last; ++n) {
    const double lam = double(n) * n * s;
    const double a_n = 6.0 / (kPi2 * double(n) * n);
    const double e_lam = std::exp(-lam);
    survival += a_n * e_lam;
    long m_last = m_live;
    const bool live = lam <= cutoff;
    if (live) {
      const double z = std::sqrt(lam / sigma);
      m_last = std::max(m_live, static_cast<long>(std::ceil((z + kPoleMargin + 1.0) / 2.0)));
    }
    double inner = 0.0;
    for (long m = 1; m <= m_last; ++m) {
      const double d = mu[m] - lam;
      double g;
      if (std::abs(d) < 1e-12 * std::max(mu[m], lam)) {
        g = e_lam;
      } else if (d > 0.0) {
        g = e_lam * -std::expm1(-d) / d;
      } else {
        g = decay[m] * -std::expm1(d) / -d;
      }
      inner += weight[m] * g;
    }
    cross += inner;
    if (live) {
      // Modes beyond m_last have e^{-mu_m} below the cutoff.
      const double tail = 8.0 / (kPi2 * sigma) * tail_inverse_quartic_odd(lam / sigma, 2.0 * m_last + 1.0);
      cross += e_lam * tail;
    }
  }
  cross *= a_lambda;

  // Indices beyond n_last have e^{-lambda_n} below the cutoff.
  double n_tail = 0.0;
  for (long m = 1; m <= m_live; ++m) {
    n_tail += weight[m] * decay[m] * tail_inverse_quadratic(mu[m] / s, double(n_last + 1));
  }
  n_tail *= 6.0 / kPi2;

  return std::clamp(1.0 - survival - cross - n_tail, 0.0, 1.0);
}

double mixture_cascade(std::span<const double> tx_weights, std::span<const double> tx_rates,
                       std::span<const double> ch_weights, std::span<const double> ch_rates, double t) {
  if (tx_weights.size() != tx_rates.size() || ch_weights.size() != ch_rates.size())
    throw DomainError("mixture_cascade: weights and rates differ in length");
  if (t < 0.0) throw DomainError("mixture_cascade: t must be >= 0");
  double r = 1.0;
  for (std::size_t n = 0; n < tx_rates.size(); ++n) {
    r -= tx_weights[n] * std::exp(-tx_rates[n] * t);
    for (std::size_t m = 0; m < ch_rates.size(); ++m) {
      r -= tx_weights[n] * ch_weights[m] * tx_rates[n] * exp_difference_quotient(tx_rates[n], ch_rates[m], t);
    }
  }
  return r;
}

}  // namespace series

namespace {

void check_time(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  params.validate();
  trunc.validate();
  if (!(std::isfinite(t) && t >= 0.0)) throw DomainError("t must be finite and >= 0");
}

void check_rate_time(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_time(t, params, trunc);
  if (t < trunc.t_min) throw DomainError("rate series diverge at t = 0: t must be >= t_min");
}

}  // namespace

double transmit_cumulative(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_time(t, params, trunc);
  return series::sphere_cumulative(transmit_decay_rate(params) * t, trunc);
}

double transmit_rate(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_rate_time(t, params, trunc);
  const double lambda1 = transmit_decay_rate(params);
  return 6.0 * lambda1 / kPi2 * series::sphere_theta(lambda1 * t, trunc);
}

double channel_cumulative(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_time(t, params, trunc);
  return series::slab_cumulative(channel_decay_rate(params) * t, trunc);
}

double channel_survival(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_time(t, params, trunc);
  return series::slab_survival(channel_decay_rate(params) * t, trunc);
}

double channel_rate(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_rate_time(t, params, trunc);
  const double mu1 = channel_decay_rate(params);
  return 8.0 * mu1 / kPi2 * series::slab_theta(mu1 * t, trunc);
}

double end_to_end_release(double t, const TransportParams& params, const TruncationPolicy& trunc) {
  check_time(t, params, trunc);
  return series::cascade_cumulative(transmit_decay_rate(params) * t, channel_decay_rate(params) * t, trunc);
}

TimeSeries sample_curve(const std::function<double(double)>& kernel, const Eigen::VectorXd& grid) {
  validate_time_grid(grid);
  TimeSeries out{grid, Eigen::VectorXd(grid.size())};
  for (Eigen::Index k = 0; k < grid.size(); ++k) out.values(k) = kernel(grid(k));
  return out;
}

TimeSeries convolve_cumulative(const std::function<double(double)>& first_cumulative,
                               const std::function<double(double)>& second_cumulative,
                               const Eigen::VectorXd& grid) {
  validate_time_grid(grid);
  const Eigen::Index n = grid.size();
  TimeSeries out{grid, Eigen::VectorXd::Zero(n)};
  if (n == 0) return out;
  const double h = n > 1 ? (grid(n - 1) - grid(0)) / double(n - 1) : 0.0;
  for (Eigen::Index k = 1; k < n; ++k) {
    if (std::abs(grid(k) - grid(k - 1) - h) > 1e-9 * std::max(1.0, std::abs(grid(n - 1))))
      throw DomainError("convolution oracle: grid must be uniformly spaced");
  }
  Eigen::VectorXd f(n), g_lag(n), g_abs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    f(j) = first_cumulative(grid(j));
    g_lag(j) = second_cumulative(double(j) * h);
    g_abs(j) = second_cumulative(grid(j));
  }
  // Both cumulatives start like sqrt(t), so within each cell F is taken linear
  // in sqrt(tau) and G linear in sqrt(lag); the plain trapezoid is only O(h)
  // near the origin.
  const auto cell = [&](Eigen::Index k, Eigen::Index j) {
    const double t = grid(k);
    const double s0 = std::sqrt(grid(j)), s1 = std::sqrt(grid(j + 1));
    const double r_a = std::sqrt(double(k - j - 1) * h), r_b = std::sqrt(double(k - j) * h);
    // int sqrt(t - s^2) ds, an antiderivative in s
    const auto prim = [t](double s) {
      return 0.5 * (s * std::sqrt(std::max(t - s * s, 0.0)) + t * std::asin(std::min(s / std::sqrt(t), 1.0)));
    };
    const double root_mean = (prim(s1) - prim(s0)) / (s1 - s0);
    const double g_a = g_lag(k - j - 1);
    return (f(j + 1) - f(j)) * (g_a + (g_lag(k - j) - g_a) / (r_b - r_a) * (root_mean - r_a));
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    double r = f(0) * 0.5 * (g_abs(k) + g_lag(k));
    for (Eigen::Index j = 0; j < k; ++j) r += cell(k, j);
    out.values(k) = r;
  }
  return out;
}

TimeSeries convolution_oracle(const TransportParams& params, const TruncationPolicy& trunc,
                              const Eigen::VectorXd& grid) {
  params.validate();
  trunc.validate();
  if (grid.size() > 0 && grid(0) < trunc.t_min) throw DomainError("convolution oracle: grid must start at or after t_min");
  return convolve_cumulative([&](double t) { return transmit_cumulative(t, params, trunc); },
                             [&](double t) { return channel_cumulative(t, params, trunc); }, grid);
}

}  // namespace mprelease
