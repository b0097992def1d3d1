#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <doctest.h>

#include "mprelease/config.hpp"
#include "mprelease/errors.hpp"
#include "mprelease/io.hpp"

using namespace mprelease;

TEST_CASE("number formatting") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(1.62e-9) == "1.62e-09");
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "NaN");
}

TEST_CASE("CSV parsing") {
  std::istringstream in("\xEF\xBB\xBF" "a,b\r\n1,2\r\n\r\n3.5,NaN\n");
  const CsvTable t = parse_csv(in);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == 3.5);
  CHECK(std::isnan(t.rows[1][1]));
  CHECK(t.lines[1] == 4);

  std::istringstream ragged("a,b\n1,2\n3\n");
  try {
    parse_csv(ragged);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream text("a\nx1\n");
  CHECK_THROWS_AS(parse_csv(text), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_csv(empty), ParseError);
  CHECK_THROWS_AS(read_csv_file("/nonexistent/file.csv"), Error);
}

TEST_CASE("CSV round trip") {
  Eigen::MatrixXd cols(3, 2);
  cols << 0.0, 1.0 / 3.0, 4.0, 2.5e-7, 8.0, std::numeric_limits<double>::quiet_NaN();
  std::ostringstream out;
  write_csv(out, {"time_h", "value"}, cols);
  std::istringstream in(out.str());
  const CsvTable t = parse_csv(in);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0][1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(t.rows[1][1] == 2.5e-7);
  CHECK(std::isnan(t.rows[2][1]));
}

TEST_CASE("dataset CSV") {
  std::istringstream good("time_h,fraction\n0,0\n2,0.1\n4,0.25\n");
  const ExperimentalDataset d = parse_dataset_csv(good, "lab");
  CHECK(d.size() == 3);
  CHECK(d.label == "lab");
  CHECK(d.fractions(2) == 0.25);

  std::ostringstream out;
  write_dataset_csv(out, d);
  std::istringstream back(out.str());
  const ExperimentalDataset again = parse_dataset_csv(back, "lab");
  CHECK(again.times == d.times);
  CHECK(again.fractions == d.fractions);

  std::istringstream unordered("time_h,fraction\n0,0\n4,0.1\n2,0.2\n");
  try {
    parse_dataset_csv(unordered, "x");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  std::istringstream wrong_header("t,f\n0,0\n");
  CHECK_THROWS_AS(parse_dataset_csv(wrong_header, "x"), ParseError);
  std::istringstream bad_fraction("time_h,fraction\n0,1.5\n");
  CHECK_THROWS_AS(parse_dataset_csv(bad_fraction, "x"), ParseError);
}

TEST_CASE("histogram CSV") {
  BinnedHistogram h;
  h.bin_edges = Eigen::Vector4d(0.84, 0.98, 1.12, 1.26);
  h.masses = Eigen::Vector3d(0.25, 0.5, 0.25);
  std::ostringstream out;
  write_histogram_csv(out, h);
  std::istringstream in(out.str());
  const BinnedHistogram back = parse_histogram_csv(in);
  CHECK((back.bin_edges - h.bin_edges).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(back.masses == h.masses);

  std::istringstream gap("bin_left_um,bin_right_um,mass\n0,1,0.5\n1.5,2,0.5\n");
  CHECK_THROWS_AS(parse_histogram_csv(gap), ParseError);
  std::istringstream negative("bin_left_um,bin_right_um,mass\n0,1,-0.5\n1,2,1.5\n");
  CHECK_THROWS_AS(parse_histogram_csv(negative), ParseError);
}

TEST_CASE("fit result JSON") {
  FitResult fit;
  fit.model = "end-to-end";
  fit.params = {{"d_i_mm2_per_h", 1.62e-9}, {"d_out_mm2_per_h", 8.13e-2}};
  fit.mse = 3.1e-4;
  fit.grid_meta = {{"coarse", "d_i_mm2_per_h", 1e-12, 1e-6, 50, true}};
  fit.residuals = Eigen::Vector2d(0.01, -0.02);
  fit.dataset_label = "lab.csv";
  fit.dataset_size = 2;
  fit.warnings = {"coarse optimum of d_i lies on the search-range boundary"};
  const auto j = to_json(fit);
  CHECK(j.at("model") == "end-to-end");
  CHECK(j.at("params").at("d_i_mm2_per_h").get<double>() == 1.62e-9);
  const FitResult back = fit_result_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.model == fit.model);
  CHECK(back.params == fit.params);
  CHECK(back.mse == fit.mse);
  CHECK(back.residuals == fit.residuals);
  CHECK(back.grid_meta.size() == 1);
  CHECK(back.grid_meta[0].points == 50);
  CHECK(back.warnings == fit.warnings);
  CHECK(back.dataset_size == 2);
}

TEST_CASE("configuration defaults") {
  const RunConfig c = parse_config("{}");
  CHECK(c.a_mm == 3.54);
  CHECK(c.mu_R_um == 1.0);
  CHECK(c.sigma_R_um == 0.12);
  CHECK(c.d_hat() == doctest::Approx(1.62e-9));
  CHECK(c.d_out_mm2_per_h == 8.13e-2);
  CHECK(c.r_norm() == doctest::Approx(1e-3));
  CHECK(c.trunc.max_terms == 200);
  CHECK(c.trunc.tail_tol == 1e-10);
  CHECK(c.quad.nodes_per_panel == 64);
  CHECK(c.search.d_i.coarse_points == 50);
  const Eigen::VectorXd grid = c.time_grid();
  CHECK(grid.size() == 25);
  CHECK(grid(24) == 96.0);
}

TEST_CASE("configuration keys") {
  const RunConfig c = parse_config(R"({
    "_comment": "omega sweep",
    "omega": 1.0,
    "d_i_mm2_per_h": 2e-9,
    "mu_R_um": 2.0,
    "t_stop_h": 10, "t_step_h": 2.5,
    "hypothesis": "volume",
    "fit_refine_stages": 3,
    "sensitivity_omega_grid": [0, 0.5]
  })");
  CHECK(c.omega == 1.0);
  CHECK(c.d_hat() == doctest::Approx(2e-9 / 2e-3));
  CHECK(c.transport().d_hat == doctest::Approx(2e-9 / 2e-3));
  CHECK(c.hypothesis == LoadingHypothesis::volume);
  CHECK(c.search.refine_stages == 3);
  CHECK(c.channel_refine_stages == 3);
  CHECK(c.sensitivity.omega_grid.size() == 2);
  CHECK(c.time_grid().size() == 5);

  const RunConfig round = apply_config_json(RunConfig{}, nlohmann::json::parse(to_json(c).dump()));
  CHECK(round.omega == c.omega);
  CHECK(round.d_hat() == doctest::Approx(c.d_hat()));
  CHECK(round.search.refine_stages == 3);
  CHECK(round.sensitivity.omega_grid == c.sensitivity.omega_grid);
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(parse_config(R"({"omgea": 1})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"omega": "one"})"), ParseError);
  CHECK_THROWS_AS(parse_config("{\"omega\": 1,"), ParseError);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ParseError);
  try {
    parse_config(R"({"omega": 2.5})").validate();
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("omega") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"d_i_mm2_per_h": 1e-9, "d_hat_mm2_per_h": 1e-6})").validate(), DomainError);
  CHECK_THROWS_AS(parse_config(R"({"t_step_h": 0})").validate(), DomainError);
  CHECK_THROWS_AS(parse_config(R"({"sigma_R_um": -0.1})").validate(), DomainError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("shipped schema lists every config key with its default") {
  std::ifstream in(std::string(MPRELEASE_SOURCE_DIR) + "/docs/config.schema.json");
  REQUIRE(in.good());
  const auto schema = nlohmann::json::parse(in);
  const auto& props = schema.at("properties");
  const auto defaults = to_json(RunConfig{});
  for (const auto& [key, value] : defaults.items()) {
    INFO(key);
    REQUIRE(props.contains(key));
    CHECK(props.at(key).at("default") == value);
  }
  nlohmann::json from_schema = nlohmann::json::object();
  for (const auto& [key, spec] : props.items()) {
    CHECK((defaults.contains(key) || key == "d_hat_mm2_per_h"));
    if (spec.contains("default")) from_schema[key] = spec.at("default");
  }
  CHECK(to_json(parse_config(from_schema.dump())) == defaults);
}
