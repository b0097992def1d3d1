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
#include "mprelease/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mprelease/errors.hpp"

namespace mprelease {

namespace {

using Json = nlohmann::json;
using Setter = std::function<void(RunConfig&, const Json&, const std::string&)>;

double number(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ParseError("field '" + key + "': expected a number");
  return v.get<double>();
}

long long integer(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ParseError("field '" + key + "': expected an integer");
  return v.get<long long>();
}

std::vector<double> numbers(const Json& v, const std::string& key) {
  if (!v.is_array()) throw ParseError("field '" + key + "': expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(number(e, key));
  return out;
}

int small_int(const Json& v, const std::string& key) {
  const long long x = integer(v, key);
  if (x < -1000000000LL || x > 1000000000LL) throw DomainError("field '" + key + "': value out of range");
  return static_cast<int>(x);
}

std::size_t count(const Json& v, const std::string& key) {
  const long long x = integer(v, key);
  if (x < 0) throw DomainError("field '" + key + "': must be >= 0");
  return static_cast<std::size_t>(x);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"a_mm", [](RunConfig& c, const Json& v, const std::string& k) { c.a_mm = number(v, k); }},
      {"mu_R_um", [](RunConfig& c, const Json& v, const std::string& k) { c.mu_R_um = number(v, k); }},
      {"sigma_R_um", [](RunConfig& c, const Json& v, const std::string& k) { c.sigma_R_um = number(v, k); }},
      {"omega", [](RunConfig& c, const Json& v, const std::string& k) { c.omega = number(v, k); }},
      {"d_i_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.d_i_mm2_per_h = number(v, k); }},
      {"d_hat_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.d_hat_mm2_per_h = number(v, k); }},
      {"d_out_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.d_out_mm2_per_h = number(v, k); }},
      {"max_terms", [](RunConfig& c, const Json& v, const std::string& k) { c.trunc.max_terms = small_int(v, k); }},
      {"tail_tol", [](RunConfig& c, const Json& v, const std::string& k) { c.trunc.tail_tol = number(v, k); }},
      {"t_min_h", [](RunConfig& c, const Json& v, const std::string& k) { c.trunc.t_min = number(v, k); }},
      {"variance_terms", [](RunConfig& c, const Json& v, const std::string& k) { c.trunc.variance_terms = small_int(v, k); }},
      {"quad_nodes", [](RunConfig& c, const Json& v, const std::string& k) { c.quad.nodes_per_panel = small_int(v, k); }},
      {"quad_panels", [](RunConfig& c, const Json& v, const std::string& k) { c.quad.panels = small_int(v, k); }},
      {"quad_grading_levels", [](RunConfig& c, const Json& v, const std::string& k) { c.quad.grading_levels = small_int(v, k); }},
      {"quad_nested_nodes", [](RunConfig& c, const Json& v, const std::string& k) { c.quad_nested.nodes_per_panel = small_int(v, k); }},
      {"quad_nested_panels", [](RunConfig& c, const Json& v, const std::string& k) { c.quad_nested.panels = small_int(v, k); }},
      {"quad_nested_grading_levels", [](RunConfig& c, const Json& v, const std::string& k) { c.quad_nested.grading_levels = small_int(v, k); }},
      {"check_variance_accuracy", [](RunConfig& c, const Json& v, const std::string& k) {
         if (!v.is_boolean()) throw ParseError("field '" + k + "': expected true or false");
         c.check_variance_accuracy = v.get<bool>();
       }},
      {"mc_samples", [](RunConfig& c, const Json& v, const std::string& k) { c.mc_samples = count(v, k); }},
      {"stats_monte_carlo", [](RunConfig& c, const Json& v, const std::string& k) {
         if (!v.is_boolean()) throw ParseError("field '" + k + "': expected true or false");
         c.stats_monte_carlo = v.get<bool>();
       }},
      {"seed", [](RunConfig& c, const Json& v, const std::string& k) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           throw ParseError("field '" + k + "': expected a nonnegative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"hypothesis", [](RunConfig& c, const Json& v, const std::string& k) {
         if (!v.is_string()) throw ParseError("field '" + k + "': expected \"equal\" or \"volume\"");
         try {
           c.hypothesis = parse_hypothesis(v.get<std::string>());
         } catch (const DomainError& e) {
           throw DomainError("field '" + k + "': " + e.what());
         }
       }},
      {"bin_width_um", [](RunConfig& c, const Json& v, const std::string& k) { c.bin_width_um = number(v, k); }},
      {"bin_origin_um", [](RunConfig& c, const Json& v, const std::string& k) { c.bin_origin_um = number(v, k); }},
      {"max_radii_rows", [](RunConfig& c, const Json& v, const std::string& k) { c.max_radii_rows = count(v, k); }},
      {"t_start_h", [](RunConfig& c, const Json& v, const std::string& k) { c.t_start_h = number(v, k); }},
      {"t_stop_h", [](RunConfig& c, const Json& v, const std::string& k) { c.t_stop_h = number(v, k); }},
      {"t_step_h", [](RunConfig& c, const Json& v, const std::string& k) { c.t_step_h = number(v, k); }},
      {"fit_d_i_min_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.search.d_i.lo = number(v, k); }},
      {"fit_d_i_max_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.search.d_i.hi = number(v, k); }},
      {"fit_d_out_min_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.search.d_out.lo = number(v, k); }},
      {"fit_d_out_max_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) { c.search.d_out.hi = number(v, k); }},
      {"fit_grid_points", [](RunConfig& c, const Json& v, const std::string& k) {
         c.search.d_i.coarse_points = c.search.d_out.coarse_points = small_int(v, k);
       }},
      {"fit_refine_points", [](RunConfig& c, const Json& v, const std::string& k) {
         c.search.d_i.refine_points = c.search.d_out.refine_points = small_int(v, k);
       }},
      {"fit_refine_stages", [](RunConfig& c, const Json& v, const std::string& k) {
         c.search.refine_stages = c.channel_refine_stages = small_int(v, k);
       }},
      {"early_cutoff", [](RunConfig& c, const Json& v, const std::string& k) { c.early_cutoff = number(v, k); }},
      {"sensitivity_omega_grid", [](RunConfig& c, const Json& v, const std::string& k) { c.sensitivity.omega_grid = numbers(v, k); }},
      {"sensitivity_eval_time_h", [](RunConfig& c, const Json& v, const std::string& k) { c.sensitivity.eval_time_h = number(v, k); }},
      {"sensitivity_d_i_targets_mm2_per_h", [](RunConfig& c, const Json& v, const std::string& k) {
         c.sensitivity.di_targets_mm2_per_h = numbers(v, k);
       }},
      {"sensitivity_sigma_R_um", [](RunConfig& c, const Json& v, const std::string& k) { c.sensitivity.sigma_R_um = number(v, k); }},
  };
  return table;
}

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw DomainError("field '" + field + "': " + rule);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void SensitivityConfig::validate() const {
  require(!omega_grid.empty(), "sensitivity_omega_grid", "must not be empty");
  for (double w : omega_grid) require(w >= 0.0 && w < 2.0, "sensitivity_omega_grid", "values must satisfy 0 <= omega < 2");
  require(positive(eval_time_h), "sensitivity_eval_time_h", "must be > 0");
  require(!di_targets_mm2_per_h.empty(), "sensitivity_d_i_targets_mm2_per_h", "must not be empty");
  for (double d : di_targets_mm2_per_h) require(positive(d), "sensitivity_d_i_targets_mm2_per_h", "values must be > 0");
  require(std::isfinite(sigma_R_um) && sigma_R_um >= 0.0, "sensitivity_sigma_R_um", "must be >= 0");
}

void RunConfig::validate() const {
  require(positive(a_mm), "a_mm", "must be > 0");
  require(positive(mu_R_um), "mu_R_um", "must be > 0");
  require(std::isfinite(sigma_R_um) && sigma_R_um >= 0.0, "sigma_R_um", "must be >= 0");
  require(std::isfinite(omega) && omega >= 0.0 && omega < 2.0, "omega", "must satisfy 0 <= omega < 2");
  require(!(d_i_mm2_per_h && d_hat_mm2_per_h), "d_i_mm2_per_h", "give either d_i_mm2_per_h or d_hat_mm2_per_h, not both");
  if (d_i_mm2_per_h) require(positive(*d_i_mm2_per_h), "d_i_mm2_per_h", "must be > 0");
  if (d_hat_mm2_per_h) require(positive(*d_hat_mm2_per_h), "d_hat_mm2_per_h", "must be > 0");
  require(positive(d_out_mm2_per_h), "d_out_mm2_per_h", "must be > 0");
  require(trunc.max_terms >= 1, "max_terms", "must be >= 1");
  require(trunc.tail_tol > 0.0 && trunc.tail_tol < 1.0, "tail_tol", "must be in (0, 1)");
  require(positive(trunc.t_min), "t_min_h", "must be > 0");
  require(trunc.variance_terms >= 1, "variance_terms", "must be >= 1");
  require(quad.nodes_per_panel >= 2, "quad_nodes", "must be >= 2");
  require(quad.panels >= 1, "quad_panels", "must be >= 1");
  require(quad.grading_levels >= 0 && quad.grading_levels <= 60, "quad_grading_levels", "must be in [0, 60]");
  require(quad_nested.nodes_per_panel >= 2, "quad_nested_nodes", "must be >= 2");
  require(quad_nested.panels >= 1, "quad_nested_panels", "must be >= 1");
  require(quad_nested.grading_levels >= 0 && quad_nested.grading_levels <= 60, "quad_nested_grading_levels",
          "must be in [0, 60]");
  require(mc_samples >= 1, "mc_samples", "must be >= 1");
  require(positive(bin_width_um), "bin_width_um", "must be > 0");
  require(std::isfinite(bin_origin_um), "bin_origin_um", "must be finite");
  require(std::isfinite(t_start_h) && t_start_h >= 0.0, "t_start_h", "must be >= 0");
  require(std::isfinite(t_stop_h) && t_stop_h >= t_start_h, "t_stop_h", "must be >= t_start_h");
  require(positive(t_step_h), "t_step_h", "must be > 0");
  require((t_stop_h - t_start_h) / t_step_h <= 1e7, "t_step_h", "grid would exceed 10^7 points");
  require(positive(search.d_i.lo) && search.d_i.hi > search.d_i.lo, "fit_d_i_max_mm2_per_h", "must exceed fit_d_i_min_mm2_per_h > 0");
  require(positive(search.d_out.lo) && search.d_out.hi > search.d_out.lo, "fit_d_out_max_mm2_per_h",
          "must exceed fit_d_out_min_mm2_per_h > 0");
  require(search.d_i.coarse_points >= 2, "fit_grid_points", "must be >= 2");
  require(search.d_i.refine_points >= 2, "fit_refine_points", "must be >= 2");
  require(search.refine_stages >= 0, "fit_refine_stages", "must be >= 0");
  require(early_cutoff > 0.0 && early_cutoff <= 1.0, "early_cutoff", "must be in (0, 1]");
  sensitivity.validate();
}

double RunConfig::d_hat() const {
  if (d_hat_mm2_per_h) return *d_hat_mm2_per_h;
  const double d_i = d_i_mm2_per_h.value_or(1.62e-9);
  return d_i / std::pow(r_norm(), omega);
}

TransportParams RunConfig::transport() const {
  TransportParams p;
  p.a = a_mm;
  p.d_hat = d_hat();
  p.omega = omega;
  p.d_out = d_out_mm2_per_h;
  p.r_norm = r_norm();
  return p;
}

SizeMoments RunConfig::moments() const { return {mu_R_um * 1e-3, sigma_R_um * 1e-3}; }

Eigen::VectorXd RunConfig::time_grid() const {
  const auto steps = static_cast<Eigen::Index>(std::floor((t_stop_h - t_start_h) / t_step_h * (1.0 + 1e-12)));
  Eigen::VectorXd g(steps + 1);
  for (Eigen::Index k = 0; k <= steps; ++k) g(k) = t_start_h + double(k) * t_step_h;
  return g;
}

RunConfig apply_config_json(RunConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("configuration must be a JSON object");
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    if (key.rfind("_comment", 0) == 0) continue;
    const auto it = table.find(key);
    if (it == table.end()) throw ParseError("unknown field '" + key + "'");
    it->second(base, value, key);
  }
  return base;
}

RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // The library message carries line and column.
    throw ParseError(std::string("configuration JSON: ") + e.what());
  }
  RunConfig c = apply_config_json(RunConfig{}, j);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open configuration '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["a_mm"] = c.a_mm;
  j["mu_R_um"] = c.mu_R_um;
  j["sigma_R_um"] = c.sigma_R_um;
  j["omega"] = c.omega;
  if (c.d_hat_mm2_per_h) {
    j["d_hat_mm2_per_h"] = *c.d_hat_mm2_per_h;
  } else {
    j["d_i_mm2_per_h"] = c.d_i_mm2_per_h.value_or(1.62e-9);
  }
  j["d_out_mm2_per_h"] = c.d_out_mm2_per_h;
  j["max_terms"] = c.trunc.max_terms;
  j["tail_tol"] = c.trunc.tail_tol;
  j["t_min_h"] = c.trunc.t_min;
  j["variance_terms"] = c.trunc.variance_terms;
  j["quad_nodes"] = c.quad.nodes_per_panel;
  j["quad_panels"] = c.quad.panels;
  j["quad_grading_levels"] = c.quad.grading_levels;
  j["quad_nested_nodes"] = c.quad_nested.nodes_per_panel;
  j["quad_nested_panels"] = c.quad_nested.panels;
  j["quad_nested_grading_levels"] = c.quad_nested.grading_levels;
  j["check_variance_accuracy"] = c.check_variance_accuracy;
  j["mc_samples"] = c.mc_samples;
  j["seed"] = c.seed;
  j["hypothesis"] = to_string(c.hypothesis);
  j["stats_monte_carlo"] = c.stats_monte_carlo;
  j["bin_width_um"] = c.bin_width_um;
  j["bin_origin_um"] = c.bin_origin_um;
  j["max_radii_rows"] = c.max_radii_rows;
  j["t_start_h"] = c.t_start_h;
  j["t_stop_h"] = c.t_stop_h;
  j["t_step_h"] = c.t_step_h;
  j["fit_d_i_min_mm2_per_h"] = c.search.d_i.lo;
  j["fit_d_i_max_mm2_per_h"] = c.search.d_i.hi;
  j["fit_d_out_min_mm2_per_h"] = c.search.d_out.lo;
  j["fit_d_out_max_mm2_per_h"] = c.search.d_out.hi;
  j["fit_grid_points"] = c.search.d_i.coarse_points;
  j["fit_refine_points"] = c.search.d_i.refine_points;
  j["fit_refine_stages"] = c.search.refine_stages;
  j["early_cutoff"] = c.early_cutoff;
  j["sensitivity_omega_grid"] = c.sensitivity.omega_grid;
  j["sensitivity_eval_time_h"] = c.sensitivity.eval_time_h;
  j["sensitivity_d_i_targets_mm2_per_h"] = c.sensitivity.di_targets_mm2_per_h;
  j["sensitivity_sigma_R_um"] = c.sensitivity.sigma_R_um;
  return j;
}

}  // namespace mprelease
