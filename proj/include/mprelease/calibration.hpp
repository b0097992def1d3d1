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

#include <string>
#include <utility>
#include <vector>

#include "mprelease/types.hpp"

namespace mprelease {

struct ExperimentalDataset {
  Eigen::VectorXd times;      // [h], strictly increasing
  Eigen::VectorXd fractions;  // released fraction, [0, 1 + 1e-6]
  std::string label;

  Eigen::Index size() const { return times.size(); }
  void validate() const;
};

// One axis of one search stage, as recorded in FitResult::grid_meta.
struct SearchStage {
  std::string stage;      // "coarse", "refine-1", ...
  std::string parameter;  // key of FitResult::params
  double lo = 0.0;
  double hi = 0.0;
  int points = 0;
  bool log_spaced = false;
};

struct FitResult {
  std::string model;  // "channel", "end-to-end", "ritger-peppas"
  std::vector<std::pair<std::string, double>> params;
  double mse = 0.0;
  std::vector<SearchStage> grid_meta;
  Eigen::VectorXd residuals;  // model - data, per sample
  std::string dataset_label;
  Eigen::Index dataset_size = 0;
  std::vector<std::string> warnings;

  double param(const std::string& name) const;
  int parameter_count() const { return static_cast<int>(params.size()); }
};

struct AxisSearch {
  double lo = 0.0;
  double hi = 0.0;
  int coarse_points = 50;  // log-spaced
  int refine_points = 10;  // linear, per refinement stage
};

struct ChannelSearch {
  AxisSearch d_out{1e-4, 1.0};
  int refine_stages = 1;
};

struct EndToEndSearch {
  AxisSearch d_i{1e-12, 1e-6};
  AxisSearch d_out{1e-4, 1.0};
  int refine_stages = 1;
};

double mse(const TimeSeries& model, const ExperimentalDataset& data);

// Fits D_o so that the channel cumulative curve matches the data.
FitResult fit_channel_only(const ExperimentalDataset& data, double a_mm, const ChannelSearch& search = {},
                           const TruncationPolicy& trunc = {});

// Fits (D_i, D_o) with geometry, omega and radius from `fixed`; d_hat and
// d_out of `fixed` are ignored.
FitResult fit_end_to_end(const ExperimentalDataset& data, const TransportParams& fixed,
                         const EndToEndSearch& search = {}, const TruncationPolicy& trunc = {});

// ln f = ln k + n ln t on samples with t > 0 and f <= early_cutoff. The
// reported MSE covers every sample of the dataset.
FitResult fit_ritger_peppas(const ExperimentalDataset& data, double early_cutoff = 0.6);

struct ComparisonRow {
  std::string model;
  int parameter_count = 0;
  double mse = 0.0;
};

// Sorted ascending by MSE; ties keep input order.
std::vector<ComparisonRow> compare_models(const ExperimentalDataset& data, const std::vector<FitResult>& fits);

}  // namespace mprelease
