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
// Command implementations behind the CLI. Each returns the process exit code
// and writes diagnostics to `err`.
#pragma once

#include <exception>
#include <iosfwd>
#include <optional>
#include <string>

#include "mprelease/config.hpp"

namespace mprelease {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInput = 2,
  kExitInfeasible = 3,
  kExitInsufficientData = 4,
};

int exit_code_for(const std::exception& e);

// time_h,transmit_cum,channel_cum,release_cum at R = mu_R.
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);

// time_h,mean_release,std_release,fixed_radius_release, followed by
// mc_mean_release,mc_std_release when config.stats_monte_carlo is set.
int cmd_stats(const RunConfig& config, std::ostream& out, std::ostream& err);

enum class FitMode { channel, end_to_end, ritger_peppas };
FitMode parse_fit_mode(const std::string& name);

// FitResult as JSON.
int cmd_fit(const RunConfig& config, const std::string& dataset_path, FitMode mode, std::ostream& out,
            std::ostream& err);

// omega,d_i,sigma_r at the configured evaluation time.
int cmd_sensitivity(const RunConfig& config, std::ostream& out, std::ostream& err);

// Writes radii.csv (um), histogram.csv and kld.csv (one row of KLDs in nats,
// one column per comparison) into `out_dir`.
int cmd_sample(const RunConfig& config, const std::string& out_dir, const std::optional<std::string>& reference_path,
               std::ostream& err);

}  // namespace mprelease
