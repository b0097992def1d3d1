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
// Random streams: sample i belongs to block i / kSampleBlock. Each block owns
// a std::mt19937_64 seeded with std::seed_seq{seed_lo, seed_hi, stream, block},
// so any block can be regenerated without drawing the preceding ones.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mprelease/size_statistics.hpp"
#include "mprelease/types.hpp"

namespace mprelease {

inline constexpr std::size_t kSampleBlock = 4096;

struct SampleSet {
  Eigen::VectorXd radii;    // normalized radii
  std::uint64_t seed = 0;
  Eigen::VectorXd weights;  // sum to 1
};

enum class LoadingHypothesis { equal, volume };

LoadingHypothesis parse_hypothesis(const std::string& name);
std::string to_string(LoadingHypothesis h);

// X ~ Gamma(gamma, rate zeta), R = X^{-1/(2-omega)}.
SampleSet sample_radii(const GammaRateParams& gp, std::size_t n, std::uint64_t seed);
// Normal(mu, sigma) radii on a separate stream; used for model comparisons.
SampleSet sample_gaussian_radii(double mu, double sigma, std::size_t n, std::uint64_t seed);

SampleSet apply_loading_hypothesis(const SampleSet& s, LoadingHypothesis hypothesis);

struct EnsembleRelease {
  TimeSeries mean;
  TimeSeries variance;
};

// tp.r_norm is replaced by each sampled radius.
EnsembleRelease ensemble_release(const SampleSet& s, const TransportParams& tp, const Eigen::VectorXd& grid,
                                 const TruncationPolicy& trunc = {});

struct BinnedHistogram {
  Eigen::VectorXd bin_edges;
  Eigen::VectorXd masses;

  void validate() const;
};

// Bins of width `bin_width` on the lattice origin + k * bin_width, covering
// every sample.
BinnedHistogram histogram_from_samples(const Eigen::VectorXd& values, double bin_width, double origin = 0.0);

// Mass of `h` on the bins of `reference`, renormalized. Each reference edge
// must coincide with an edge of `h`; BinMismatchError otherwise.
BinnedHistogram restrict_to_bins(const BinnedHistogram& h, const BinnedHistogram& reference);

// sum_i p_i ln(p_i / q_i), with 0 ln 0 = 0.
double empirical_kld(const BinnedHistogram& p, const BinnedHistogram& q);

}  // namespace mprelease
