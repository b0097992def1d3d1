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
#include "mprelease/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mprelease/errors.hpp"
#include "mprelease/parallel.hpp"
#include "mprelease/release_kernels.hpp"

namespace mprelease {

namespace {

constexpr std::uint32_t kGammaStream = 1;
constexpr std::uint32_t kGaussianStream = 2;

std::mt19937_64 block_engine(std::uint64_t seed, std::uint32_t stream, std::size_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(std::uint64_t(block) >> 32)};
  return std::mt19937_64(seq);
}

template <typename Draw>
SampleSet draw_blocks(std::size_t n, std::uint64_t seed, std::uint32_t stream, Draw draw) {
  if (n == 0) throw DomainError("sample count must be >= 1");
  SampleSet s;
  s.seed = seed;
  s.radii.resize(static_cast<Eigen::Index>(n));
  const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  parallel_for(blocks, [&](std::size_t b) {
    auto engine = block_engine(seed, stream, b);
    const std::size_t end = std::min(n, (b + 1) * kSampleBlock);
    for (std::size_t i = b * kSampleBlock; i < end; ++i) s.radii(static_cast<Eigen::Index>(i)) = draw(engine);
  });
  s.weights = Eigen::VectorXd::Constant(s.radii.size(), 1.0 / double(n));
  return s;
}

}  // namespace

LoadingHypothesis parse_hypothesis(const std::string& name) {
  if (name == "equal") return LoadingHypothesis::equal;
  if (name == "volume") return LoadingHypothesis::volume;
  throw DomainError("hypothesis must be 'equal' or 'volume', got '" + name + "'");
}

std::string to_string(LoadingHypothesis h) { return h == LoadingHypothesis::equal ? "equal" : "volume"; }

SampleSet sample_radii(const GammaRateParams& gp, std::size_t n, std::uint64_t seed) {
  gp.validate();
  if (!(gp.gamma > 1.0 / gp.omega_tilde()))
    throw InfeasibleError("sample_radii: gamma must exceed 1/(2-omega) for a finite mean radius");
  const double exponent = -1.0 / gp.omega_tilde();
  return draw_blocks(n, seed, kGammaStream, [&](std::mt19937_64& engine) {
    std::gamma_distribution<double> dist(gp.gamma, 1.0 / gp.zeta);
    return std::pow(dist(engine), exponent);
  });
}

SampleSet sample_gaussian_radii(double mu, double sigma, std::size_t n, std::uint64_t seed) {
  if (!(mu > 0.0) || !(sigma > 0.0)) throw DomainError("Gaussian radii need mu > 0 and sigma > 0");
  return draw_blocks(n, seed, kGaussianStream, [&](std::mt19937_64& engine) {
    std::normal_distribution<double> dist(mu, sigma);
    return dist(engine);
  });
}

SampleSet apply_loading_hypothesis(const SampleSet& s, LoadingHypothesis hypothesis) {
  if (s.radii.size() == 0) throw DomainError("apply_loading_hypothesis: empty sample");
  SampleSet out = s;
  if (hypothesis == LoadingHypothesis::equal) {
    out.weights = Eigen::VectorXd::Constant(s.radii.size(), 1.0 / double(s.radii.size()));
  } else {
    // Relative to the largest radius to keep the cubes in range.
    const double scale = s.radii.cwiseAbs().maxCoeff();
    out.weights = (s.radii.array() / scale).cube().matrix();
    out.weights /= out.weights.sum();
  }
  return out;
}

EnsembleRelease ensemble_release(const SampleSet& s, const TransportParams& tp, const Eigen::VectorXd& grid,
                                 const TruncationPolicy& trunc) {
  tp.validate();
  trunc.validate();
  validate_time_grid(grid);
  if (s.radii.size() == 0 || s.weights.size() != s.radii.size())
    throw DomainError("ensemble_release: radii and weights must be nonempty and equally long");
  const Eigen::Index n = s.radii.size();
  const Eigen::Index k = grid.size();
  Eigen::MatrixXd curves(k, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    TransportParams p = tp;
    p.r_norm = s.radii(i);
    const double lambda1 = transmit_decay_rate(p);
    const double mu1 = channel_decay_rate(p);
    for (Eigen::Index j = 0; j < k; ++j) curves(j, i) = series::cascade_cumulative(lambda1 * grid(j), mu1 * grid(j), trunc);
  });
  EnsembleRelease out;
  out.mean = {grid, curves * s.weights};
  const Eigen::MatrixXd centered = curves.colwise() - out.mean.values;
  out.variance = {grid, centered.array().square().matrix() * s.weights};
  return out;
}

void BinnedHistogram::validate() const {
  if (bin_edges.size() < 2 || masses.size() != bin_edges.size() - 1)
    throw DomainError("histogram: need n+1 edges for n masses");
  for (Eigen::Index i = 1; i < bin_edges.size(); ++i)
    if (!(bin_edges(i) > bin_edges(i - 1))) throw DomainError("histogram: edges must be strictly increasing");
  if ((masses.array() < 0.0).any()) throw DomainError("histogram: masses must be nonnegative");
  if (std::abs(masses.sum() - 1.0) > 1e-9) throw DomainError("histogram: masses must sum to 1");
}

BinnedHistogram histogram_from_samples(const Eigen::VectorXd& values, double bin_width, double origin) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw DomainError("bin width must be > 0");
  if (!std::isfinite(origin)) throw DomainError("histogram origin must be finite");
  if (values.size() == 0) throw DomainError("histogram: empty sample");
  if (!values.allFinite()) throw DomainError("histogram: samples must be finite");
  const auto lo = static_cast<long long>(std::floor((values.minCoeff() - origin) / bin_width));
  const auto hi = static_cast<long long>(std::floor((values.maxCoeff() - origin) / bin_width));
  const auto bins = static_cast<Eigen::Index>(hi - lo + 1);
  BinnedHistogram h;
  h.bin_edges.resize(bins + 1);
  for (Eigen::Index i = 0; i <= bins; ++i) h.bin_edges(i) = origin + double(lo + i) * bin_width;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(bins);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    auto b = static_cast<Eigen::Index>(std::floor((values(i) - origin) / bin_width)) - lo;
    counts(std::clamp<Eigen::Index>(b, 0, bins - 1)) += 1.0;
  }
  h.masses = counts / double(values.size());
  return h;
}

BinnedHistogram restrict_to_bins(const BinnedHistogram& h, const BinnedHistogram& reference) {
  h.validate();
  reference.validate();
  const Eigen::Index edges = h.bin_edges.size();
  const double width = h.bin_edges(1) - h.bin_edges(0);
  const double tol = 1e-6 * width;
  const double first = h.bin_edges(0);
  // Lattice index of x; the lattice extends past the model range.
  auto lattice_index = [&](double x) -> long long {
    const long long k = std::llround((x - first) / width);
    const double on_lattice = k >= 0 && k < edges ? h.bin_edges(k) : first + double(k) * width;
    if (std::abs(on_lattice - x) > tol)
      throw BinMismatchError("reference edge " + std::to_string(x) + " is not on the model bin lattice");
    return k;
  };
  BinnedHistogram out{reference.bin_edges, Eigen::VectorXd::Zero(reference.masses.size())};
  for (Eigen::Index b = 0; b < reference.masses.size(); ++b) {
    const long long i = lattice_index(reference.bin_edges(b));
    if (lattice_index(reference.bin_edges(b + 1)) != i + 1)
      throw BinMismatchError("reference bin " + std::to_string(b + 1) + " does not coincide with a model bin");
    if (i >= 0 && i < edges - 1) out.masses(b) = h.masses(i);  // zero outside the model range
  }
  const double total = out.masses.sum();
  if (total <= 0.0) throw SupportMismatchError("model histogram has no mass on the reference bins");
  out.masses /= total;
  return out;
}

double empirical_kld(const BinnedHistogram& p, const BinnedHistogram& q) {
  p.validate();
  q.validate();
  if (p.bin_edges.size() != q.bin_edges.size() ||
      ((p.bin_edges - q.bin_edges).cwiseAbs().array() >
       1e-9 * std::max(1e-300, p.bin_edges.cwiseAbs().maxCoeff())).any())
    throw BinMismatchError("histograms have different bin edges");
  double kld = 0.0;
  for (Eigen::Index i = 0; i < p.masses.size(); ++i) {
    if (p.masses(i) == 0.0) continue;
    if (q.masses(i) == 0.0) throw SupportMismatchError("q has zero mass in bin " + std::to_string(i) + " where p > 0");
    kld += p.masses(i) * std::log(p.masses(i) / q.masses(i));
  }
  return std::max(kld, 0.0);
}

}  // namespace mprelease
