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
#include "mprelease/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "mprelease/calibration.hpp"
#include "mprelease/errors.hpp"
#include "mprelease/io.hpp"
#include "mprelease/monte_carlo.hpp"
#include "mprelease/release_kernels.hpp"
#include "mprelease/size_statistics.hpp"

namespace mprelease {

namespace {

template <typename Body>
int guarded(std::ostream& err, Body body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InsufficientDataError*>(&e)) return kExitInsufficientData;
  if (dynamic_cast<const InfeasibleError*>(&e) || dynamic_cast<const DegenerateDistributionError*>(&e) ||
      dynamic_cast<const ConvergenceError*>(&e))
    return kExitInfeasible;
  if (dynamic_cast<const Error*>(&e)) return kExitInput;
  return kExitFailure;
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    const TransportParams tp = config.transport();
    const Eigen::VectorXd grid = config.time_grid();
    Eigen::MatrixXd cols(grid.size(), 4);
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      cols(k, 0) = grid(k);
      cols(k, 1) = transmit_cumulative(grid(k), tp, config.trunc);
      cols(k, 2) = channel_cumulative(grid(k), tp, config.trunc);
      cols(k, 3) = end_to_end_release(grid(k), tp, config.trunc);
    }
    write_csv(out, {"time_h", "transmit_cum", "channel_cum", "release_cum"}, cols);
    return int(kExitOk);
  });
}

int cmd_stats(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    const TransportParams tp = config.transport();
    const GammaRateParams gp = solve_gamma_params(config.moments(), config.omega);
    radius_moments(gp);  // feasibility gate for the variance
    const Eigen::VectorXd grid = config.time_grid();
    Eigen::MatrixXd cols(grid.size(), 4);
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      const double t = grid(k);
      double var;
      if (config.check_variance_accuracy) {
        const CheckedVariance cv = variance_release_checked(t, gp, tp, config.trunc, config.quad_nested);
        if (!cv.stable)
          err << "warning: variance at t = " << format_number(t) << " h shifts by " << format_number(cv.relative_shift)
              << " (relative) when quadrature nodes are doubled\n";
        var = cv.variance;
      } else {
        var = variance_release(t, gp, tp, config.trunc, config.quad_nested);
      }
      cols(k, 0) = t;
      cols(k, 1) = mean_release(t, gp, tp, config.trunc, config.quad);
      cols(k, 2) = std::sqrt(var);
      cols(k, 3) = end_to_end_release(t, tp, config.trunc);
    }
    std::vector<std::string> header{"time_h", "mean_release", "std_release", "fixed_radius_release"};
    if (config.stats_monte_carlo) {
      const SampleSet s = apply_loading_hypothesis(sample_radii(gp, config.mc_samples, config.seed), config.hypothesis);
      const EnsembleRelease e = ensemble_release(s, tp, grid, config.trunc);
      cols.conservativeResize(Eigen::NoChange, 6);
      cols.col(4) = e.mean.values;
      cols.col(5) = e.variance.values.cwiseSqrt();
      header.insert(header.end(), {"mc_mean_release", "mc_std_release"});
    }
    write_csv(out, header, cols);
    return int(kExitOk);
  });
}

FitMode parse_fit_mode(const std::string& name) {
  if (name == "channel") return FitMode::channel;
  if (name == "end-to-end") return FitMode::end_to_end;
  if (name == "ritger-peppas") return FitMode::ritger_peppas;
  throw DomainError("mode must be one of channel, end-to-end, ritger-peppas; got '" + name + "'");
}

int cmd_fit(const RunConfig& config, const std::string& dataset_path, FitMode mode, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    const ExperimentalDataset data = read_dataset_csv(dataset_path);
    FitResult fit;
    switch (mode) {
      case FitMode::channel: {
        ChannelSearch search;
        search.d_out = config.search.d_out;
        search.refine_stages = config.channel_refine_stages;
        fit = fit_channel_only(data, config.a_mm, search, config.trunc);
        break;
      }
      case FitMode::end_to_end:
        fit = fit_end_to_end(data, config.transport(), config.search, config.trunc);
        break;
      case FitMode::ritger_peppas:
        fit = fit_ritger_peppas(data, config.early_cutoff);
        break;
    }
    for (const auto& w : fit.warnings) err << "warning: " << w << '\n';
    out << to_json(fit).dump(2) << '\n';
    return int(kExitOk);
  });
}

int cmd_sensitivity(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    const SensitivityConfig& sens = config.sensitivity;
    const SizeMoments moments{config.r_norm(), sens.sigma_R_um * 1e-3};
    int code = kExitOk;
    Eigen::MatrixXd cols(sens.di_targets_mm2_per_h.size() * sens.omega_grid.size(), 3);
    Eigen::Index row = 0;
    for (double d_i : sens.di_targets_mm2_per_h) {
      for (double omega : sens.omega_grid) {
        double sigma_r = std::numeric_limits<double>::quiet_NaN();
        try {
          TransportParams tp = config.transport();
          tp.omega = omega;
          tp.d_hat = d_i / std::pow(moments.mu_R, omega);
          const GammaRateParams gp = solve_gamma_params(moments, omega);
          sigma_r = std::sqrt(variance_release(sens.eval_time_h, gp, tp, config.trunc, config.quad_nested));
        } catch (const std::exception& e) {
          const int c = exit_code_for(e);
          if (c != kExitInfeasible) throw;
          err << "infeasible point omega = " << format_number(omega) << ", d_i = " << format_number(d_i) << ": "
              << e.what() << '\n';
          code = kExitInfeasible;
        }
        cols.row(row++) << omega, d_i, sigma_r;
      }
    }
    write_csv(out, {"omega", "d_i", "sigma_r"}, cols);
    return code;
  });
}

int cmd_sample(const RunConfig& config, const std::string& out_dir, const std::optional<std::string>& reference_path,
               std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    std::optional<BinnedHistogram> reference;
    if (reference_path) reference = read_histogram_csv(*reference_path);
    const SizeMoments moments = config.moments();
    const GammaRateParams gp = solve_gamma_params(moments, config.omega);
    const SampleSet gamma_set = sample_radii(gp, config.mc_samples, config.seed);
    const SampleSet gauss_set = sample_gaussian_radii(moments.mu_R, moments.sigma_R, config.mc_samples, config.seed);
    const Eigen::VectorXd gamma_um = gamma_set.radii * 1e3;
    const Eigen::VectorXd gauss_um = gauss_set.radii * 1e3;
    const BinnedHistogram gamma_hist = histogram_from_samples(gamma_um, config.bin_width_um, config.bin_origin_um);
    const BinnedHistogram gauss_hist = histogram_from_samples(gauss_um, config.bin_width_um, config.bin_origin_um);

    // An infinite divergence (model empty where the other side has mass) is reported as NaN.
    std::vector<std::pair<std::string, double>> klds;
    const auto add_kld = [&](const std::string& name, const BinnedHistogram& p, const BinnedHistogram& q_full) {
      double value = std::numeric_limits<double>::quiet_NaN();
      try {
        value = empirical_kld(p, restrict_to_bins(q_full, p));
      } catch (const SupportMismatchError& e) {
        err << "note: " << name << " KLD undefined: " << e.what() << '\n';
      }
      klds.emplace_back(name, value);
    };
    {
      // Model-to-model comparison on the union of both lattices.
      Eigen::VectorXd both(gamma_um.size() + gauss_um.size());
      both << gamma_um, gauss_um;
      const BinnedHistogram frame = histogram_from_samples(both, config.bin_width_um, config.bin_origin_um);
      add_kld("gaussian_vs_gamma", restrict_to_bins(gauss_hist, frame), gamma_hist);
    }
    if (reference) {
      add_kld("reference_vs_gamma", *reference, gamma_hist);
      add_kld("reference_vs_gaussian", *reference, gauss_hist);
    }

    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DomainError("cannot create output directory '" + out_dir + "': " + ec.message());
    {
      auto f = open_output(dir / "radii.csv");
      const auto rows = std::min<Eigen::Index>(gamma_um.size(), static_cast<Eigen::Index>(config.max_radii_rows));
      write_csv(f, {"radius_um"}, gamma_um.head(rows));
    }
    {
      auto f = open_output(dir / "histogram.csv");
      write_histogram_csv(f, gamma_hist);
    }
    {
      auto f = open_output(dir / "kld.csv");
      std::vector<std::string> header;
      Eigen::MatrixXd values(1, static_cast<Eigen::Index>(klds.size()));
      for (std::size_t i = 0; i < klds.size(); ++i) {
        header.push_back(klds[i].first);
        values(0, static_cast<Eigen::Index>(i)) = klds[i].second;
      }
      write_csv(f, header, values);
    }
    return int(kExitOk);
  });
}

}  // namespace mprelease
