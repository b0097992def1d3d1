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
// Run configuration. The JSON document is flat and every dimensional key
// carries its unit (docs/config.schema.json lists all keys).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mprelease/calibration.hpp"
#include "mprelease/monte_carlo.hpp"
#include "mprelease/quadrature.hpp"
#include "mprelease/size_statistics.hpp"
#include "mprelease/types.hpp"

namespace mprelease {

struct SensitivityConfig {
  std::vector<double> omega_grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75};
  double eval_time_h = 24.0;
  std::vector<double> di_targets_mm2_per_h{1e-10, 1e-9, 1e-8};
  double sigma_R_um = 0.24;

  void validate() const;
};

struct RunConfig {
  // geometry and particles
  double a_mm = 3.54;
  double mu_R_um = 1.0;
  double sigma_R_um = 0.12;
  double omega = 0.0;
  // transport; at most one of d_i / d_hat is set, d_i = 1.62e-9 otherwise
  std::optional<double> d_i_mm2_per_h;
  std::optional<double> d_hat_mm2_per_h;
  double d_out_mm2_per_h = 8.13e-2;
  // numerics
  TruncationPolicy trunc;
  QuadratureSpec quad;
  QuadratureSpec quad_nested = QuadratureSpec::nested();
  bool check_variance_accuracy = false;
  // Monte Carlo and sampling
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 42;
  LoadingHypothesis hypothesis = LoadingHypothesis::equal;
  // stats: append Monte Carlo ensemble columns
  bool stats_monte_carlo = false;
  double bin_width_um = 0.14;
  double bin_origin_um = 0.0;
  std::size_t max_radii_rows = 1000000;
  // time grid
  double t_start_h = 0.0;
  double t_stop_h = 96.0;
  double t_step_h = 4.0;
  // calibration
  EndToEndSearch search;
  int channel_refine_stages = 1;
  double early_cutoff = 0.6;
  SensitivityConfig sensitivity;

  void validate() const;
  double r_norm() const { return mu_R_um * 1e-3; }
  double d_hat() const;
  TransportParams transport() const;
  SizeMoments moments() const;
  Eigen::VectorXd time_grid() const;
};

// Applies the keys of `j` on top of `base`. Unknown keys and wrong types are
// ParseErrors naming the field; range violations are DomainErrors.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& j);
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

nlohmann::ordered_json to_json(const RunConfig& c);

}  // namespace mprelease
