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
#include "mprelease/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "mprelease/errors.hpp"
#include "mprelease/parallel.hpp"
#include "mprelease/release_kernels.hpp"

namespace mprelease {

namespace {

constexpr int kMinFitSamples = 3;

void validate_axis(const AxisSearch& axis, const char* name) {
  if (!(axis.lo > 0.0 && axis.hi > axis.lo && std::isfinite(axis.hi)))
    throw DomainError(std::string("empty search range for ") + name);
  if (axis.coarse_points < 2) throw DomainError(std::string("coarse_points must be >= 2 for ") + name);
  if (axis.refine_points < 2) throw DomainError(std::string("refine_points must be >= 2 for ") + name);
}

void require_fit_samples(const ExperimentalDataset& data) {
  data.validate();
  if (data.size() < kMinFitSamples)
    throw InsufficientDataError("at least " + std::to_string(kMinFitSamples) + " samples are required, got " +
                                std::to_string(data.size()));
}

Eigen::VectorXd log_axis(const AxisSearch& axis) {
  Eigen::VectorXd v(axis.coarse_points);
  const double la = std::log(axis.lo), lb = std::log(axis.hi);
  for (int i = 0; i < axis.coarse_points; ++i) v(i) = std::exp(la + (lb - la) * i / (axis.coarse_points - 1));
  v(0) = axis.lo;
  v(axis.coarse_points - 1) = axis.hi;
  return v;
}

Eigen::VectorXd linear_axis(double lo, double hi, int points) {
  return Eigen::VectorXd::LinSpaced(points, lo, hi);
}

// Neighbouring grid values of index i, clamped at the ends.
std::pair<double, double> neighbours(const Eigen::VectorXd& axis, Eigen::Index i) {
  const double lo = axis(std::max<Eigen::Index>(i - 1, 0));
  const double hi = axis(std::min<Eigen::Index>(i + 1, axis.size() - 1));
  return {lo, hi};
}

using Point = std::array<double, 2>;

// Exhaustive evaluation; lowest index wins ties.
std::pair<std::size_t, double> evaluate_points(const std::vector<Point>& points,
                                               const std::function<double(double, double)>& objective,
                                               std::vector<double>& values) {
  values.assign(points.size(), 0.0);
  parallel_for(points.size(), [&](std::size_t k) { values[k] = objective(points[k][0], points[k][1]); });
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] < values[best]) best = k;
  return {best, values[best]};
}

// Coarse log grid, then refinement stages. Stage 1 is a linear grid over the
// coarse neighbours of the best node. Later stages fit a quadratic to the
// previous stage's MSE values in log coordinates and lay the grid along its
// principal axes, over the region where the quadratic stays within 4x of the
// incumbent's excess. Correlated parameters give long thin MSE valleys that an
// axis-aligned grid resolves only with about sqrt(condition number) nodes per
// axis. The incumbent never gets worse.
class GridRefiner {
 public:
  struct Axis {
    std::string name;
    AxisSearch range;
  };

  GridRefiner(std::vector<Axis> axes, std::function<double(double, double)> objective, FitResult& fit)
      : axes_(std::move(axes)), dims_(axes_.size()), objective_(std::move(objective)), fit_(fit) {}

  // Returns the coarse optimum indices for boundary warnings.
  std::array<Eigen::Index, 2> coarse() {
    std::array<Eigen::VectorXd, 2> grid;
    for (std::size_t d = 0; d < 2; ++d) grid[d] = d < dims_ ? log_axis(axes_[d].range) : Eigen::VectorXd::Zero(1);
    const std::size_t best = evaluate_tensor("coarse", grid, true);
    const std::array<Eigen::Index, 2> idx{Eigen::Index(best / grid[1].size()), Eigen::Index(best % grid[1].size())};
    for (std::size_t d = 0; d < dims_; ++d) bracket_[d] = neighbours(grid[d], idx[d]);
    return idx;
  }

  void refine(int stages) {
    for (int stage = 1; stage <= stages; ++stage) {
      const std::string label = "refine-" + std::to_string(stage);
      if (stage == 1) {
        std::array<Eigen::VectorXd, 2> grid{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
        for (std::size_t d = 0; d < dims_; ++d)
          grid[d] = linear_axis(bracket_[d].first, bracket_[d].second, axes_[d].range.refine_points);
        evaluate_tensor(label, grid, false);
      } else {
        evaluate_aligned(label);
      }
    }
  }

  double best(std::size_t d) const { return best_[d]; }

 private:
  std::size_t evaluate_tensor(const std::string& label, const std::array<Eigen::VectorXd, 2>& grid, bool log_spaced) {
    std::vector<Point> points;
    for (Eigen::Index i = 0; i < grid[0].size(); ++i)
      for (Eigen::Index j = 0; j < grid[1].size(); ++j) points.push_back({grid[0](i), grid[1](j)});
    for (std::size_t d = 0; d < dims_; ++d)
      fit_.grid_meta.push_back({label, axes_[d].name, grid[d](0), grid[d](grid[d].size() - 1),
                                int(grid[d].size()), log_spaced});
    return evaluate(points);
  }

  std::size_t evaluate(const std::vector<Point>& points) {
    const auto [best, value] = evaluate_points(points, objective_, last_values_);
    last_points_ = points;
    if (value <= best_mse_) {
      best_mse_ = value;
      best_ = points[best];
    }
    return best;
  }

  // Quadratic model of the last stage in log coordinates, then a rotated grid.
  void evaluate_aligned(const std::string& label) {
    const auto d = static_cast<Eigen::Index>(dims_);
    Eigen::VectorXd center(d), scale(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const Point& p : last_points_) {
        lo = std::min(lo, std::log(p[k]));
        hi = std::max(hi, std::log(p[k]));
      }
      center(k) = std::log(best_[k]);
      scale(k) = std::max(0.5 * (hi - lo), 1e-300);
    }
    // q(x) = c + g.x + x.H.x / 2 in x = (ln p - center) / scale, fitted to
    // the better half of the nodes, where the surface is closest to quadratic.
    std::vector<std::size_t> order(last_points_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return last_values_[x] < last_values_[y]; });
    const Eigen::Index terms = d == 1 ? 3 : 6;
    const auto used = static_cast<Eigen::Index>(std::max<std::size_t>(order.size() / 2, std::size_t(2 * terms)));
    const Eigen::Index rows = std::min<Eigen::Index>(used, Eigen::Index(order.size()));
    Eigen::MatrixXd basis(rows, terms);
    Eigen::VectorXd rhs(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Point& p = last_points_[order[std::size_t(r)]];
      Eigen::VectorXd x(d);
      for (Eigen::Index k = 0; k < d; ++k) x(k) = (std::log(p[k]) - center(k)) / scale(k);
      if (d == 1)
        basis.row(r) << 1.0, x(0), 0.5 * x(0) * x(0);
      else
        basis.row(r) << 1.0, x(0), x(1), 0.5 * x(0) * x(0), x(0) * x(1), 0.5 * x(1) * x(1);
      rhs(r) = last_values_[order[std::size_t(r)]];
    }
    const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd g(d);
    Eigen::MatrixXd h(d, d);
    if (d == 1) {
      g << coef(1);
      h << coef(2);
    } else {
      g << coef(1), coef(2);
      h << coef(3), coef(4), coef(4), coef(5);
    }
    // Back to ln p coordinates.
    const Eigen::MatrixXd s_inv = scale.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd h_log = s_inv * h * s_inv;
    const Eigen::VectorXd g_log = s_inv * g;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h_log);
    const Eigen::VectorXd lambda = eig.eigenvalues();
    Eigen::MatrixXd axes = eig.eigenvectors();
    const bool convex = lambda.minCoeff() > 0.0;
    if (!convex) axes.setIdentity();  // shrink around the incumbent instead
    const int n = axes_[0].range.refine_points;

    // Extent of the last grid along each new axis.
    Eigen::VectorXd extent = Eigen::VectorXd::Zero(d);
    for (const Point& p : last_points_) {
      Eigen::VectorXd z(d);
      for (Eigen::Index k = 0; k < d; ++k) z(k) = std::log(p[k]) - center(k);
      extent = extent.cwiseMax((axes.transpose() * z).cwiseAbs());
    }
    extent = extent.cwiseMax(1e-12);

    Eigen::VectorXd mid = center;
    Eigen::VectorXd half = extent * (2.0 / (n - 1));
    if (convex) {
      Eigen::VectorXd move = axes.transpose() * (-h_log.ldlt().solve(g_log));
      move = move.cwiseMax(-2.0 * extent).cwiseMin(2.0 * extent);
      const double predicted_min = coef(0) + g_log.dot(axes * move) + 0.5 * move.dot(lambda.asDiagonal() * move);
      mid = center + axes * move;
      const double excess = std::max(best_mse_ - predicted_min, 0.0);
      for (Eigen::Index k = 0; k < d; ++k)
        half(k) = std::clamp(std::sqrt(8.0 * excess / lambda(k)), extent(k) * (2.0 / (n - 1)), 2.0 * extent(k));
    }
    const Eigen::MatrixXd frame = axes * half.asDiagonal();

    std::vector<Point> points;
    std::array<double, 2> lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    std::array<double, 2> hi{-lo[0], -lo[1]};
    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
    const Eigen::Index second = d == 1 ? 1 : n;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < second; ++j) {
        Eigen::VectorXd coord(d);
        coord(0) = u(i);
        if (d == 2) coord(1) = u(j);
        const Eigen::VectorXd z = mid + frame * coord;
        Point p{0.0, 0.0};
        for (Eigen::Index k = 0; k < d; ++k) {
          p[k] = std::clamp(std::exp(z(k)), axes_[k].range.lo, axes_[k].range.hi);
          lo[k] = std::min(lo[k], p[k]);
          hi[k] = std::max(hi[k], p[k]);
        }
        points.push_back(p);
      }
    }
    for (std::size_t k = 0; k < dims_; ++k) fit_.grid_meta.push_back({label, axes_[k].name, lo[k], hi[k], n, true});
    evaluate(points);
  }

  std::vector<Axis> axes_;
  std::size_t dims_;
  std::function<double(double, double)> objective_;
  FitResult& fit_;
  std::array<std::pair<double, double>, 2> bracket_{};
  Point best_{};
  double best_mse_ = std::numeric_limits<double>::infinity();
  std::vector<Point> last_points_;
  std::vector<double> last_values_;
};

Eigen::VectorXd release_at(const ExperimentalDataset& data, const TransportParams& p, const TruncationPolicy& trunc) {
  const double lambda1 = transmit_decay_rate(p);
  const double mu1 = channel_decay_rate(p);
  Eigen::VectorXd out(data.size());
  for (Eigen::Index k = 0; k < data.size(); ++k)
    out(k) = series::cascade_cumulative(lambda1 * data.times(k), mu1 * data.times(k), trunc);
  return out;
}

Eigen::VectorXd channel_at(const ExperimentalDataset& data, double a_mm, double d_out, const TruncationPolicy& trunc) {
  TransportParams p;
  p.a = a_mm;
  p.d_out = d_out;
  const double mu1 = channel_decay_rate(p);
  Eigen::VectorXd out(data.size());
  for (Eigen::Index k = 0; k < data.size(); ++k) out(k) = series::slab_cumulative(mu1 * data.times(k), trunc);
  return out;
}

void boundary_warning(FitResult& fit, const char* name, Eigen::Index i, Eigen::Index size) {
  if (i == 0 || i == size - 1)
    fit.warnings.push_back(std::string("coarse optimum of ") + name + " lies on the search-range boundary");
}

void zero_data_warning(FitResult& fit, const ExperimentalDataset& data) {
  if ((data.fractions.array() == 0.0).all()) fit.warnings.push_back("all release fractions are zero");
}

}  // namespace

void ExperimentalDataset::validate() const {
  if (times.size() != fractions.size()) throw DomainError("dataset: times and fractions differ in length");
  for (Eigen::Index k = 0; k < size(); ++k) {
    if (!std::isfinite(times(k)) || times(k) < 0.0)
      throw DomainError("dataset sample " + std::to_string(k + 1) + ": time must be finite and >= 0");
    if (k > 0 && !(times(k) > times(k - 1)))
      throw DomainError("dataset sample " + std::to_string(k + 1) + ": times must be strictly increasing");
    if (!(fractions(k) >= 0.0 && fractions(k) <= 1.0 + 1e-6))
      throw DomainError("dataset sample " + std::to_string(k + 1) + ": fraction must be in [0, 1]");
  }
}

double FitResult::param(const std::string& name) const {
  for (const auto& [key, value] : params)
    if (key == name) return value;
  throw DomainError("fit result has no parameter '" + name + "'");
}

double mse(const TimeSeries& model, const ExperimentalDataset& data) {
  if (model.times.size() != data.times.size() || model.values.size() != data.times.size())
    throw GridMismatchError("model and data have different sample counts");
  for (Eigen::Index k = 0; k < data.size(); ++k) {
    if (std::abs(model.times(k) - data.times(k)) > 1e-12 * std::max(1.0, std::abs(data.times(k))))
      throw GridMismatchError("model time " + std::to_string(model.times(k)) + " differs from data time " +
                              std::to_string(data.times(k)));
  }
  if (data.size() == 0) return 0.0;
  return (model.values - data.fractions).squaredNorm() / double(data.size());
}

FitResult fit_channel_only(const ExperimentalDataset& data, double a_mm, const ChannelSearch& search,
                           const TruncationPolicy& trunc) {
  require_fit_samples(data);
  trunc.validate();
  validate_axis(search.d_out, "d_out");
  if (search.refine_stages < 0) throw DomainError("refine_stages must be >= 0");
  if (!(a_mm > 0.0)) throw DomainError("a_mm must be > 0");
  auto objective = [&](double d_out, double) {
    return (channel_at(data, a_mm, d_out, trunc) - data.fractions).squaredNorm() / double(data.size());
  };

  FitResult fit;
  fit.model = "channel";
  GridRefiner refiner({{"d_out_mm2_per_h", search.d_out}}, objective, fit);
  boundary_warning(fit, "d_out", refiner.coarse()[0], search.d_out.coarse_points);
  refiner.refine(search.refine_stages);
  const double x_best = refiner.best(0);
  fit.params = {{"d_out_mm2_per_h", x_best}};
  fit.residuals = channel_at(data, a_mm, x_best, trunc) - data.fractions;
  fit.mse = fit.residuals.squaredNorm() / double(data.size());
  fit.dataset_label = data.label;
  fit.dataset_size = data.size();
  zero_data_warning(fit, data);
  return fit;
}

FitResult fit_end_to_end(const ExperimentalDataset& data, const TransportParams& fixed, const EndToEndSearch& search,
                         const TruncationPolicy& trunc) {
  require_fit_samples(data);
  trunc.validate();
  fixed.validate();
  validate_axis(search.d_i, "d_i");
  validate_axis(search.d_out, "d_out");
  if (search.refine_stages < 0) throw DomainError("refine_stages must be >= 0");
  const double radius_factor = std::pow(fixed.r_norm, fixed.omega);
  auto params_for = [&](double d_i, double d_out) {
    TransportParams p = fixed;
    p.d_hat = d_i / radius_factor;
    p.d_out = d_out;
    return p;
  };
  auto objective = [&](double d_i, double d_out) {
    return (release_at(data, params_for(d_i, d_out), trunc) - data.fractions).squaredNorm() / double(data.size());
  };

  FitResult fit;
  fit.model = "end-to-end";
  GridRefiner refiner({{"d_i_mm2_per_h", search.d_i}, {"d_out_mm2_per_h", search.d_out}}, objective, fit);
  const auto coarse = refiner.coarse();
  boundary_warning(fit, "d_i", coarse[0], search.d_i.coarse_points);
  boundary_warning(fit, "d_out", coarse[1], search.d_out.coarse_points);
  refiner.refine(search.refine_stages);
  const double di_best = refiner.best(0), do_best = refiner.best(1);
  fit.params = {{"d_i_mm2_per_h", di_best}, {"d_out_mm2_per_h", do_best}};
  fit.residuals = release_at(data, params_for(di_best, do_best), trunc) - data.fractions;
  fit.mse = fit.residuals.squaredNorm() / double(data.size());
  fit.dataset_label = data.label;
  fit.dataset_size = data.size();
  zero_data_warning(fit, data);
  return fit;
}

FitResult fit_ritger_peppas(const ExperimentalDataset& data, double early_cutoff) {
  data.validate();
  if (!(early_cutoff > 0.0 && early_cutoff <= 1.0 + 1e-6)) throw DomainError("early_cutoff must be in (0, 1]");
  std::vector<Eigen::Index> window;
  for (Eigen::Index k = 0; k < data.size(); ++k) {
    if (data.times(k) > 0.0 && data.fractions(k) <= early_cutoff) {
      if (!(data.fractions(k) > 0.0))
        throw DomainError("dataset sample " + std::to_string(k + 1) +
                          ": zero release fraction inside the Ritger-Peppas fit window");
      window.push_back(k);
    }
  }
  if (static_cast<int>(window.size()) < kMinFitSamples)
    throw InsufficientDataError("Ritger-Peppas fit needs at least " + std::to_string(kMinFitSamples) +
                                " samples with t > 0 and fraction <= " + std::to_string(early_cutoff) + ", got " +
                                std::to_string(window.size()));
  const auto m = static_cast<Eigen::Index>(window.size());
  Eigen::MatrixXd design(m, 2);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    design(r, 0) = 1.0;
    design(r, 1) = std::log(data.times(window[r]));
    rhs(r) = std::log(data.fractions(window[r]));
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
  const double k = std::exp(coef(0));
  const double n = coef(1);
  if (!(n > 0.0)) throw DomainError("Ritger-Peppas fit gave a non-positive exponent; release data are not increasing");

  FitResult fit;
  fit.model = "ritger-peppas";
  fit.params = {{"k_per_h_pow_n", k}, {"n_dimensionless", n}};
  fit.residuals = (k * data.times.array().pow(n)).matrix() - data.fractions;
  fit.mse = fit.residuals.squaredNorm() / double(data.size());
  fit.grid_meta.push_back({"log-linear", "early_cutoff_fraction", 0.0, early_cutoff, int(m), false});
  fit.dataset_label = data.label;
  fit.dataset_size = data.size();
  return fit;
}

std::vector<ComparisonRow> compare_models(const ExperimentalDataset& data, const std::vector<FitResult>& fits) {
  if (fits.size() < 2) throw DomainError("compare_models needs at least two fits");
  std::vector<ComparisonRow> rows;
  for (const auto& f : fits) {
    if (f.dataset_label != data.label || f.dataset_size != data.size() || f.residuals.size() != data.size())
      throw GridMismatchError("fit '" + f.model + "' was not computed on dataset '" + data.label + "'");
    rows.push_back({f.model, f.parameter_count(), f.mse});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.mse < b.mse; });
  return rows;
}

}  // namespace mprelease
