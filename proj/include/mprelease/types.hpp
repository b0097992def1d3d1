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

#include <Eigen/Core>

namespace mprelease {

// Canonical units: millimeters and hours. Radii are normalized by 1 mm.
struct TransportParams {
  double a = 3.54;         // fleece height [mm]
  double d_hat = 1.62e-9;  // D^ [mm^2/h]; D_i = d_hat * r_norm^omega
  double omega = 0.0;      // radius/diffusivity exponent, [0, 2)
  double d_out = 8.13e-2;  // fleece diffusion coefficient [mm^2/h]
  double r_norm = 1e-3;    // particle radius / 1 mm

  void validate() const;
};

struct TruncationPolicy {
  int max_terms = 200;
  double tail_tol = 1e-10;
  double t_min = 1e-6;  // [h]
  // Per-index cap for the pair sums of the release variance.
  int variance_terms = 30;

  void validate() const;
  // Exponent below which exp(-x) is treated as negligible: ln(1/tail_tol) + 10.
  double exponent_cutoff() const;
};

struct TimeSeries {
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  Eigen::Index size() const { return times.size(); }
  // Throws DomainError on length mismatch, negative or non-increasing times.
  void validate() const;
};

// Validates that `grid` is nonnegative and strictly increasing.
void validate_time_grid(const Eigen::VectorXd& grid);

}  // namespace mprelease
