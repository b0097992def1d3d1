#include <cmath>
#include <random>

#include <doctest.h>

#include "mprelease/calibration.hpp"
#include "mprelease/errors.hpp"
#include "mprelease/release_kernels.hpp"

using namespace mprelease;

namespace {

TransportParams geometry() {
  TransportParams tp;
  tp.a = 3.54;
  tp.omega = 0.0;
  tp.r_norm = 1e-3;
  return tp;
}

ExperimentalDataset channel_data(double d_out, const Eigen::VectorXd& times) {
  TransportParams tp = geometry();
  tp.d_out = d_out;
  ExperimentalDataset data{times, Eigen::VectorXd(times.size()), "synthetic-channel"};
  for (Eigen::Index k = 0; k < times.size(); ++k) data.fractions(k) = channel_cumulative(times(k), tp);
  return data;
}

ExperimentalDataset release_data(double d_i, double d_out, const Eigen::VectorXd& times) {
  TransportParams tp = geometry();
  tp.d_hat = d_i;
  tp.d_out = d_out;
  ExperimentalDataset data{times, Eigen::VectorXd(times.size()), "synthetic-release"};
  for (Eigen::Index k = 0; k < times.size(); ++k) data.fractions(k) = end_to_end_release(times(k), tp);
  return data;
}

// Step of the last refinement stage for `parameter`.
double refined_step(const FitResult& fit, const std::string& parameter) {
  for (auto it = fit.grid_meta.rbegin(); it != fit.grid_meta.rend(); ++it)
    if (it->parameter == parameter) return (it->hi - it->lo) / (it->points - 1);
  return 0.0;
}

Eigen::VectorXd twelve_points() { return Eigen::VectorXd::LinSpaced(12, 8.0, 96.0); }

}  // namespace

TEST_CASE("mean squared error") {
  ExperimentalDataset data{Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.2, 0.4, 0.5), "d"};
  TimeSeries model{data.times, data.fractions};
  CHECK(mse(model, data) == 0.0);
  model.values = data.fractions.array() + 0.05;
  CHECK(mse(model, data) == doctest::Approx(0.0025).epsilon(1e-12));
  model.values = data.fractions + Eigen::Vector3d(0.1, -0.1, 0.2);
  CHECK(mse(model, data) == doctest::Approx(0.02).epsilon(1e-12));

  TimeSeries shifted{Eigen::Vector3d(1.0, 2.0, 3.5), data.fractions};
  CHECK_THROWS_AS(mse(shifted, data), GridMismatchError);
  TimeSeries shorter{Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(0.2, 0.4)};
  CHECK_THROWS_AS(mse(shorter, data), GridMismatchError);
}

TEST_CASE("channel-only fit") {
  SUBCASE("noiseless recovery") {
    const ExperimentalDataset data = channel_data(7.3e-2, twelve_points());
    const FitResult fit = fit_channel_only(data, 3.54);
    CHECK(fit.model == "channel");
    CHECK(fit.parameter_count() == 1);
    CHECK(std::abs(fit.param("d_out_mm2_per_h") - 7.3e-2) <= refined_step(fit, "d_out_mm2_per_h"));
    CHECK(fit.residuals.size() == data.size());
    CHECK(fit.warnings.empty());
    CHECK(fit.grid_meta.size() == 2);

    ChannelSearch deep;
    deep.refine_stages = 8;
    const FitResult fine = fit_channel_only(data, 3.54, deep);
    CHECK(fine.mse <= 1e-10);
    CHECK(std::abs(fine.param("d_out_mm2_per_h") - 7.3e-2) <= refined_step(fine, "d_out_mm2_per_h"));
  }
  SUBCASE("noise floor") {
    const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(48, 2.0, 96.0);
    ExperimentalDataset data = channel_data(7.3e-2, times);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (Eigen::Index k = 0; k < data.size(); ++k) data.fractions(k) = std::clamp(data.fractions(k) + noise(rng), 0.0, 1.0);
    const FitResult fit = fit_channel_only(data, 3.54);
    CHECK(fit.mse >= 0.5e-4);
    CHECK(fit.mse <= 2.0e-4);
  }
  SUBCASE("exhaustive coarse grid and refinement") {
    const ExperimentalDataset data = channel_data(7.3e-2, twelve_points());
    ChannelSearch coarse_only;
    coarse_only.refine_stages = 0;
    const FitResult coarse = fit_channel_only(data, 3.54, coarse_only);
    const FitResult refined = fit_channel_only(data, 3.54);
    CHECK(refined.mse <= coarse.mse);
    // Every coarse grid point is at least as bad as the reported optimum.
    const AxisSearch axis = ChannelSearch{}.d_out;
    for (int i = 0; i < axis.coarse_points; ++i) {
      const double d = axis.lo * std::pow(axis.hi / axis.lo, double(i) / (axis.coarse_points - 1));
      const ExperimentalDataset curve = channel_data(d, data.times);
      const double value = (curve.fractions - data.fractions).squaredNorm() / double(data.size());
      CHECK(coarse.mse <= value + 1e-15);
    }
  }
  SUBCASE("errors") {
    const ExperimentalDataset data = channel_data(7.3e-2, twelve_points());
    ChannelSearch empty;
    empty.d_out = {1.0, 1.0};
    CHECK_THROWS_AS(fit_channel_only(data, 3.54, empty), DomainError);
    const ExperimentalDataset tiny{Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(0.1, 0.2), "tiny"};
    CHECK_THROWS_AS(fit_channel_only(tiny, 3.54), InsufficientDataError);
  }
}

TEST_CASE("end-to-end fit") {
  SUBCASE("noiseless recovery") {
    const ExperimentalDataset data = release_data(1.62e-9, 8.13e-2, twelve_points());
    // With one stage, truth and fit share the refinement bracket. lambda_1 ~ mu_1
    // here, so the MSE valley is too thin for a 10 x 10 axis-aligned grid to
    // pin the fit to the nearest node.
    const FitResult single = fit_end_to_end(data, geometry());
    CHECK(single.model == "end-to-end");
    REQUIRE(single.grid_meta.size() == 4);
    for (const SearchStage& st : {single.grid_meta[2], single.grid_meta[3]}) {
      const double truth = st.parameter == "d_i_mm2_per_h" ? 1.62e-9 : 8.13e-2;
      INFO(st.parameter);
      CHECK(st.stage == "refine-1");
      CHECK(truth >= st.lo);
      CHECK(truth <= st.hi);
      CHECK(single.param(st.parameter) >= st.lo);
      CHECK(single.param(st.parameter) <= st.hi);
    }

    EndToEndSearch deep;
    deep.refine_stages = 10;
    const FitResult fit = fit_end_to_end(data, geometry(), deep);
    CHECK(std::abs(fit.param("d_i_mm2_per_h") - 1.62e-9) <= refined_step(fit, "d_i_mm2_per_h"));
    CHECK(std::abs(fit.param("d_out_mm2_per_h") - 8.13e-2) <= refined_step(fit, "d_out_mm2_per_h"));
    CHECK(fit.grid_meta.size() == 22);
  }
  SUBCASE("round trip with repeated refinement") {
    EndToEndSearch deep;
    deep.refine_stages = 10;
    for (const auto& [d_i, d_out] : {std::pair{1.62e-9, 8.13e-2}, std::pair{4e-10, 0.3}, std::pair{2e-8, 5e-3}}) {
      const ExperimentalDataset data = release_data(d_i, d_out, twelve_points());
      const FitResult fit = fit_end_to_end(data, geometry(), deep);
      INFO("d_i = " << d_i << " d_out = " << d_out);
      CHECK(fit.mse <= 1e-10);
    }
  }
  SUBCASE("refinement never increases the error") {
    const ExperimentalDataset data = release_data(7e-10, 2e-2, twelve_points());
    EndToEndSearch coarse_only;
    coarse_only.refine_stages = 0;
    const double coarse = fit_end_to_end(data, geometry(), coarse_only).mse;
    CHECK(fit_end_to_end(data, geometry()).mse <= coarse);
  }
  SUBCASE("all-zero data") {
    ExperimentalDataset data{twelve_points(), Eigen::VectorXd::Zero(12), "zeros"};
    const FitResult fit = fit_end_to_end(data, geometry());
    CHECK(fit.param("d_i_mm2_per_h") == doctest::Approx(1e-12));
    CHECK(fit.param("d_out_mm2_per_h") == doctest::Approx(1e-4));
    CHECK(fit.mse >= 0.0);
    CHECK(fit.warnings.size() >= 2);
  }
}

TEST_CASE("Ritger-Peppas fit") {
  SUBCASE("exact power law") {
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(8, 0.5, 4.0);
    const ExperimentalDataset data{t, 0.2 * t.array().sqrt(), "power"};
    const FitResult fit = fit_ritger_peppas(data);
    CHECK(fit.param("k_per_h_pow_n") == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(fit.param("n_dimensionless") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.mse <= 1e-28);
  }
  SUBCASE("slab early release") {
    const double tau_end = 0.1;  // early regime, H below 0.4
    TransportParams tp = geometry();
    tp.d_out = 8.13e-2;
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(20, 0.5, tau_end * tp.a * tp.a / tp.d_out);
    const ExperimentalDataset data = channel_data(8.13e-2, t);
    const double n = fit_ritger_peppas(data).param("n_dimensionless");
    CHECK(std::abs(n - 0.5) <= 0.05);
  }
  SUBCASE("sphere early release") {
    TransportParams tp = geometry();
    tp.d_hat = 1.62e-9;
    const double lambda1 = transmit_decay_rate(tp);
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(20, 0.01 / lambda1, 0.5 / lambda1);
    ExperimentalDataset data{t, Eigen::VectorXd(t.size()), "sphere"};
    for (Eigen::Index k = 0; k < t.size(); ++k) data.fractions(k) = transmit_cumulative(t(k), tp);
    const double n = fit_ritger_peppas(data).param("n_dimensionless");
    CHECK(n >= 0.4);
    CHECK(n <= 0.55);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_ritger_peppas({Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.1), "one"}),
                    InsufficientDataError);
    const ExperimentalDataset zero{Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.1, 0.0, 0.2), "zero"};
    CHECK_THROWS_AS(fit_ritger_peppas(zero), DomainError);
  }
}

TEST_CASE("model comparison") {
  ExperimentalDataset data{Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.1, 0.2, 0.3), "d"};
  auto make = [&](const std::string& model, double m, int params) {
    FitResult f;
    f.model = model;
    f.mse = m;
    f.dataset_label = data.label;
    f.dataset_size = data.size();
    f.residuals = Eigen::VectorXd::Zero(data.size());
    for (int i = 0; i < params; ++i) f.params.emplace_back("p" + std::to_string(i), 1.0);
    return f;
  };
  const auto rows = compare_models(data, {make("ritger-peppas", 5.2e-3, 2), make("end-to-end", 3.1e-4, 2)});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model == "end-to-end");
  CHECK(rows[1].model == "ritger-peppas");
  CHECK(rows[0].parameter_count == 2);

  const auto tied = compare_models(data, {make("b", 1e-3, 1), make("a", 1e-3, 2), make("c", 1e-4, 1)});
  CHECK(tied[0].model == "c");
  CHECK(tied[1].model == "b");
  CHECK(tied[2].model == "a");

  CHECK_THROWS_AS(compare_models(data, {make("a", 1e-3, 1)}), DomainError);
  FitResult other = make("x", 1e-3, 1);
  other.dataset_label = "other";
  CHECK_THROWS_AS(compare_models(data, {make("a", 1e-3, 1), other}), GridMismatchError);
}
