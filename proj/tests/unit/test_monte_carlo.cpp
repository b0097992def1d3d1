#include <cmath>
#include <random>

#include <doctest.h>

#include "mprelease/errors.hpp"
#include "mprelease/monte_carlo.hpp"
#include "mprelease/release_kernels.hpp"
#include "mprelease/size_statistics.hpp"

using namespace mprelease;

namespace {

TransportParams table_params() {
  TransportParams tp;
  tp.a = 3.54;
  tp.d_hat = 1.62e-9;
  tp.d_out = 8.13e-2;
  tp.r_norm = 1e-3;
  return tp;
}

BinnedHistogram make_histogram(std::initializer_list<double> edges, std::initializer_list<double> masses) {
  BinnedHistogram h;
  h.bin_edges = Eigen::Map<const Eigen::VectorXd>(edges.begin(), Eigen::Index(edges.size()));
  h.masses = Eigen::Map<const Eigen::VectorXd>(masses.begin(), Eigen::Index(masses.size()));
  return h;
}

}  // namespace

TEST_CASE("sampling is deterministic and block-addressable") {
  const GammaRateParams gp{3.0, 1.0, 0.0};
  const SampleSet a = sample_radii(gp, 10000, 42);
  const SampleSet b = sample_radii(gp, 10000, 42);
  CHECK(a.radii == b.radii);
  CHECK(a.seed == 42);
  CHECK(a.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.weights.size() == a.radii.size());
  CHECK(sample_radii(gp, 10000, 43).radii != a.radii);

  // A longer run shares the leading blocks.
  const SampleSet longer = sample_radii(gp, 3 * kSampleBlock + 5, 42);
  CHECK(longer.radii.head(a.radii.size()) == a.radii);

  CHECK_THROWS_AS(sample_radii(gp, 0, 1), DomainError);
  CHECK_THROWS_AS(sample_radii({0.4, 1.0, 0.0}, 10, 1), InfeasibleError);
  CHECK_THROWS_AS(sample_gaussian_radii(1.0, -0.1, 10, 1), DomainError);

  const SampleSet g = sample_gaussian_radii(1e-3, 0.12e-3, 200000, 5);
  CHECK(g.radii.minCoeff() > 0.0);
  CHECK(g.radii.mean() == doctest::Approx(1e-3).epsilon(1e-3));
  CHECK(g.radii == sample_gaussian_radii(1e-3, 0.12e-3, 200000, 5).radii);
}

TEST_CASE("sample mean matches the analytic radius mean") {
  const SampleSet s = sample_radii({3.0, 1.0, 0.0}, 1000000, 2026);
  CHECK(s.radii.mean() == doctest::Approx(0.6647).epsilon(1e-2));
}

TEST_CASE("loading hypotheses") {
  SampleSet s;
  s.radii = Eigen::Vector2d(1.0, 2.0);
  s.weights = Eigen::Vector2d(0.5, 0.5);
  const SampleSet v = apply_loading_hypothesis(s, LoadingHypothesis::volume);
  CHECK(v.weights(0) == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(v.weights(1) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));

  const SampleSet e = apply_loading_hypothesis(v, LoadingHypothesis::equal);
  CHECK(e.weights(0) == 0.5);
  CHECK(e.weights(1) == 0.5);

  s.radii = Eigen::Vector3d(0.7, 0.7, 0.7);
  s.weights = Eigen::Vector3d::Constant(1.0 / 3.0);
  const SampleSet same = apply_loading_hypothesis(s, LoadingHypothesis::volume);
  for (int i = 0; i < 3; ++i) CHECK(same.weights(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK(parse_hypothesis("equal") == LoadingHypothesis::equal);
  CHECK(parse_hypothesis("volume") == LoadingHypothesis::volume);
  CHECK(to_string(LoadingHypothesis::volume) == "volume");
  CHECK_THROWS_AS(parse_hypothesis("mass"), DomainError);
}

TEST_CASE("ensemble release") {
  const TransportParams tp = table_params();
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(13, 0.0, 96.0);

  SUBCASE("single radius") {
    SampleSet s;
    s.radii = Eigen::VectorXd::Constant(1, 1.1e-3);
    s.weights = Eigen::VectorXd::Ones(1);
    const EnsembleRelease e = ensemble_release(s, tp, grid);
    TransportParams at = tp;
    at.r_norm = 1.1e-3;
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      CHECK(e.mean.values(k) == doctest::Approx(end_to_end_release(grid(k), at)).epsilon(1e-15));
      CHECK(e.variance.values(k) == 0.0);
    }
  }
  SUBCASE("identical radii under both hypotheses") {
    SampleSet s;
    s.radii = Eigen::VectorXd::Constant(5, 0.9e-3);
    s.weights = Eigen::VectorXd::Constant(5, 0.2);
    const EnsembleRelease a = ensemble_release(apply_loading_hypothesis(s, LoadingHypothesis::equal), tp, grid);
    const EnsembleRelease b = ensemble_release(apply_loading_hypothesis(s, LoadingHypothesis::volume), tp, grid);
    CHECK((a.mean.values - b.mean.values).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((a.variance.values - b.variance.values).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("weighted mean stays within the per-sample range") {
    const GammaRateParams gp = solve_gamma_params({1e-3, 0.24e-3}, 0.0);
    const SampleSet s = apply_loading_hypothesis(sample_radii(gp, 300, 9), LoadingHypothesis::volume);
    const EnsembleRelease e = ensemble_release(s, tp, grid);
    const double r_min = s.radii.minCoeff(), r_max = s.radii.maxCoeff();
    TransportParams small = tp, large = tp;
    small.r_norm = r_min;
    large.r_norm = r_max;
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      CHECK(e.mean.values(k) >= end_to_end_release(grid(k), large) - 1e-15);
      CHECK(e.mean.values(k) <= end_to_end_release(grid(k), small) + 1e-15);
      CHECK(e.variance.values(k) >= 0.0);
    }
  }
  SUBCASE("deterministic curves") {
    const GammaRateParams gp = solve_gamma_params({1e-3, 0.12e-3}, 0.0);
    const SampleSet s = sample_radii(gp, 2000, 77);
    CHECK(ensemble_release(s, tp, grid).mean.values == ensemble_release(s, tp, grid).mean.values);
  }
}

TEST_CASE("ensemble mean converges to the analytic mean") {
  const TransportParams tp = table_params();
  const GammaRateParams gp = solve_gamma_params({1e-3, 0.24e-3}, 0.0);
  Eigen::VectorXd grid(3);
  grid << 1.0, 24.0, 72.0;
  for (std::size_t n : {std::size_t(1000), std::size_t(10000), std::size_t(100000)}) {
    const EnsembleRelease e = ensemble_release(sample_radii(gp, n, 1234), tp, grid);
    for (Eigen::Index k = 0; k < grid.size(); ++k) {
      const double se = std::sqrt(e.variance.values(k) / double(n));
      INFO("n = " << n << " t = " << grid(k));
      CHECK(std::abs(e.mean.values(k) - mean_release(grid(k), gp, tp)) <= 4.0 * se);
    }
  }
}

TEST_CASE("volume-weighted ensemble matches the size-biased Gamma mean") {
  // Weighting R = X^{-1/(2-omega)} by R^3 turns Gamma(g, z) into Gamma(g - 3/(2-omega), z).
  for (double omega : {0.0, 1.0}) {
    TransportParams tp = table_params();
    tp.omega = omega;
    tp.d_hat = 1.62e-9 / std::pow(1e-3, omega);
    const GammaRateParams gp = solve_gamma_params({1e-3, 0.24e-3}, omega);
    GammaRateParams biased = gp;
    biased.gamma -= 3.0 / gp.omega_tilde();
    const SampleSet s = apply_loading_hypothesis(sample_radii(gp, 20000, 99), LoadingHypothesis::volume);
    for (double t : {24.0, 108.0}) {
      const EnsembleRelease e = ensemble_release(s, tp, Eigen::VectorXd::Constant(1, t));
      double se2 = 0.0;
      for (Eigen::Index i = 0; i < s.radii.size(); ++i) {
        TransportParams one = tp;
        one.r_norm = s.radii(i);
        se2 += std::pow(s.weights(i) * (end_to_end_release(t, one) - e.mean.values(0)), 2);
      }
      INFO("omega = " << omega << " t = " << t);
      CHECK(std::abs(e.mean.values(0) - mean_release(t, biased, tp)) <= 4.0 * std::sqrt(se2));
      CHECK(mean_release(t, biased, tp) < mean_release(t, gp, tp));  // larger particles release later
    }
  }
}

TEST_CASE("histograms") {
  const BinnedHistogram h = histogram_from_samples(Eigen::Vector4d(0.1, 0.1, 0.3, 0.5), 0.2, 0.0);
  REQUIRE(h.masses.size() == 3);
  CHECK(h.masses(0) == doctest::Approx(0.5));
  CHECK(h.masses(1) == doctest::Approx(0.25));
  CHECK(h.masses(2) == doctest::Approx(0.25));
  CHECK(h.bin_edges(0) == doctest::Approx(0.0));
  CHECK(h.bin_edges(3) == doctest::Approx(0.6));

  const SampleSet s = sample_radii({18.0, 1.7e-5, 0.0}, 50000, 3);
  const BinnedHistogram big = histogram_from_samples(s.radii * 1e3, 0.14, 0.0);
  CHECK(big.masses.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big.masses.minCoeff() >= 0.0);
  CHECK(big.bin_edges(0) <= s.radii.minCoeff() * 1e3);
  CHECK(big.bin_edges(big.bin_edges.size() - 1) > s.radii.maxCoeff() * 1e3);
  // Edges sit on the lattice k * width.
  const double k0 = big.bin_edges(0) / 0.14;
  CHECK(std::abs(k0 - std::round(k0)) < 1e-9);

  CHECK_THROWS_AS(histogram_from_samples(Eigen::VectorXd(), 0.2), DomainError);
  CHECK_THROWS_AS(histogram_from_samples(Eigen::Vector2d(0.1, 0.2), 0.0), DomainError);
}

TEST_CASE("restricting to reference bins") {
  const BinnedHistogram model = make_histogram({0.0, 0.2, 0.4, 0.6, 0.8}, {0.1, 0.4, 0.4, 0.1});
  const BinnedHistogram ref = make_histogram({0.2, 0.4, 0.6}, {0.5, 0.5});
  const BinnedHistogram r = restrict_to_bins(model, ref);
  CHECK(r.masses(0) == doctest::Approx(0.5));
  CHECK(r.masses(1) == doctest::Approx(0.5));
  CHECK(r.bin_edges == ref.bin_edges);

  // Reference bins beyond the model range receive zero mass.
  const BinnedHistogram wide = make_histogram({0.6, 0.8, 1.0}, {0.5, 0.5});
  const BinnedHistogram w = restrict_to_bins(model, wide);
  CHECK(w.masses(0) == doctest::Approx(1.0));
  CHECK(w.masses(1) == 0.0);

  CHECK_THROWS_AS(restrict_to_bins(model, make_histogram({0.1, 0.3}, {1.0})), BinMismatchError);
  CHECK_THROWS_AS(restrict_to_bins(model, make_histogram({0.0, 0.3}, {1.0})), BinMismatchError);
}

TEST_CASE("empirical KLD") {
  const BinnedHistogram p = make_histogram({0.0, 1.0, 2.0}, {0.5, 0.5});
  const BinnedHistogram q = make_histogram({0.0, 1.0, 2.0}, {0.25, 0.75});
  CHECK(empirical_kld(p, p) == 0.0);
  CHECK(empirical_kld(p, q) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-14));
  CHECK(empirical_kld(p, q) == doctest::Approx(0.1438).epsilon(1e-3));
  const BinnedHistogram point = make_histogram({0.0, 1.0, 2.0}, {1.0, 0.0});
  CHECK(empirical_kld(point, p) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(empirical_kld(p, point), SupportMismatchError);
  CHECK_THROWS_AS(empirical_kld(p, make_histogram({0.0, 1.0, 3.0}, {0.5, 0.5})), BinMismatchError);
  CHECK_THROWS_AS(empirical_kld(p, make_histogram({0.0, 3.0}, {1.0})), BinMismatchError);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd edges = Eigen::VectorXd::LinSpaced(9, 0.0, 8.0);
  for (int trial = 0; trial < 200; ++trial) {
    BinnedHistogram a{edges, Eigen::VectorXd(8)}, b{edges, Eigen::VectorXd(8)};
    for (int i = 0; i < 8; ++i) {
      a.masses(i) = u(rng) < 0.2 ? 0.0 : u(rng);
      b.masses(i) = 0.01 + u(rng);
    }
    a.masses /= a.masses.sum();
    b.masses /= b.masses.sum();
    CHECK(empirical_kld(a, b) >= 0.0);
    CHECK(empirical_kld(b, b) == 0.0);
  }
}
