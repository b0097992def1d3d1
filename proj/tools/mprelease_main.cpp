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
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mprelease/commands.hpp"
#include "mprelease/config.hpp"
#include "mprelease/errors.hpp"

namespace {

using namespace mprelease;

// Flag values collected before the config file is read; set flags win.
struct Overrides {
  std::optional<double> a_mm, mu_R_um, sigma_R_um, omega, d_i, d_hat, d_out;
  std::optional<double> t_start, t_stop, t_step;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> bin_width_um, bin_origin_um, eval_time, sens_sigma_R_um, early_cutoff;
  std::optional<std::vector<double>> omega_grid, di_targets;
  std::optional<std::string> hypothesis;
  bool monte_carlo = false;
};

void add_common(CLI::App* cmd, std::string& config_path, std::string* out_path, Overrides& o) {
  cmd->add_option("-c,--config", config_path, "JSON configuration file");
  if (out_path) cmd->add_option("-o,--out", *out_path, "output file (default: stdout)");
  cmd->add_option("--a-mm", o.a_mm, "fleece height [mm]");
  cmd->add_option("--mu-r-um", o.mu_R_um, "mean particle radius [um]");
  cmd->add_option("--sigma-r-um", o.sigma_R_um, "radius standard deviation [um]");
  cmd->add_option("--omega", o.omega, "radius/diffusivity exponent, 0 <= omega < 2");
  cmd->add_option("--d-i", o.d_i, "particle diffusion coefficient D_i at mu_R [mm^2/h]");
  cmd->add_option("--d-hat", o.d_hat, "radius-independent diffusion constant [mm^2/h]");
  cmd->add_option("--d-out", o.d_out, "fleece diffusion coefficient [mm^2/h]");
  cmd->add_option("--t-start", o.t_start, "first grid time [h]");
  cmd->add_option("--t-stop", o.t_stop, "last grid time [h]");
  cmd->add_option("--t-step", o.t_step, "grid spacing [h]");
}

RunConfig build_config(const std::string& path, const Overrides& o) {
  RunConfig c = path.empty() ? RunConfig{} : load_config(path);
  if (o.a_mm) c.a_mm = *o.a_mm;
  if (o.mu_R_um) c.mu_R_um = *o.mu_R_um;
  if (o.sigma_R_um) c.sigma_R_um = *o.sigma_R_um;
  if (o.omega) c.omega = *o.omega;
  if (o.d_i) {
    c.d_i_mm2_per_h = *o.d_i;
    c.d_hat_mm2_per_h.reset();
  }
  if (o.d_hat) {
    c.d_hat_mm2_per_h = *o.d_hat;
    c.d_i_mm2_per_h.reset();
  }
  if (o.d_out) c.d_out_mm2_per_h = *o.d_out;
  if (o.t_start) c.t_start_h = *o.t_start;
  if (o.t_stop) c.t_stop_h = *o.t_stop;
  if (o.t_step) c.t_step_h = *o.t_step;
  if (o.samples) c.mc_samples = *o.samples;
  if (o.seed) c.seed = *o.seed;
  if (o.bin_width_um) c.bin_width_um = *o.bin_width_um;
  if (o.bin_origin_um) c.bin_origin_um = *o.bin_origin_um;
  if (o.eval_time) c.sensitivity.eval_time_h = *o.eval_time;
  if (o.sens_sigma_R_um) c.sensitivity.sigma_R_um = *o.sens_sigma_R_um;
  if (o.omega_grid) c.sensitivity.omega_grid = *o.omega_grid;
  if (o.di_targets) c.sensitivity.di_targets_mm2_per_h = *o.di_targets;
  if (o.early_cutoff) c.early_cutoff = *o.early_cutoff;
  if (o.monte_carlo) c.stats_monte_carlo = true;
  if (o.hypothesis) c.hypothesis = parse_hypothesis(*o.hypothesis);
  return c;
}

// Runs `body` with the configured output stream.
template <typename Body>
int with_output(const std::string& out_path, Body body) {
  if (out_path.empty()) return body(std::cout);
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "error: cannot write '" << out_path << "'\n";
    return kExitInput;
  }
  return body(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drug release from microparticles in a wound dressing: simulation, statistics and calibration"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, mode = "end-to-end", out_dir = "sample_out", reference;
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "fixed-radius transmit, channel and end-to-end release curves");
  add_common(simulate, config_path, &out_path, o);

  auto* stats = app.add_subcommand("stats", "mean and standard deviation of release over random radii");
  add_common(stats, config_path, &out_path, o);
  stats->add_flag("--monte-carlo", o.monte_carlo, "append Monte Carlo ensemble mean and standard deviation");
  stats->add_option("--samples", o.samples, "number of radii for --monte-carlo");
  stats->add_option("--seed", o.seed, "random seed");
  stats->add_option("--hypothesis", o.hypothesis, "drug load per particle: equal | volume");

  auto* fit = app.add_subcommand("fit", "fit model parameters to a time_h,fraction dataset");
  add_common(fit, config_path, &out_path, o);
  fit->add_option("-d,--data", data_path, "dataset CSV")->required();
  fit->add_option("-m,--mode", mode, "channel | end-to-end | ritger-peppas");
  fit->add_option("--early-cutoff", o.early_cutoff, "Ritger-Peppas fit window upper fraction");

  auto* sensitivity = app.add_subcommand("sensitivity", "release standard deviation versus omega at fixed D_i");
  add_common(sensitivity, config_path, &out_path, o);
  sensitivity->add_option("--omega-grid", o.omega_grid, "omega values")->delimiter(',');
  sensitivity->add_option("--di-targets", o.di_targets, "D_i values [mm^2/h]")->delimiter(',');
  sensitivity->add_option("--eval-time", o.eval_time, "evaluation time [h]");
  sensitivity->add_option("--sens-sigma-r-um", o.sens_sigma_R_um, "radius standard deviation for this study [um]");

  auto* sample = app.add_subcommand("sample", "sample radii, bin them and compare with a reference histogram");
  add_common(sample, config_path, nullptr, o);
  sample->add_option("--out-dir", out_dir, "output directory");
  sample->add_option("--reference", reference, "reference histogram CSV (bin_left_um,bin_right_um,mass)");
  sample->add_option("--samples", o.samples, "number of radii");
  sample->add_option("--seed", o.seed, "random seed");
  sample->add_option("--bin-width-um", o.bin_width_um, "histogram bin width [um]");
  sample->add_option("--bin-origin-um", o.bin_origin_um, "histogram lattice origin [um]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  RunConfig config;
  try {
    config = build_config(config_path, o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }

  if (*simulate) return with_output(out_path, [&](std::ostream& out) { return cmd_simulate(config, out, std::cerr); });
  if (*stats) return with_output(out_path, [&](std::ostream& out) { return cmd_stats(config, out, std::cerr); });
  if (*sensitivity)
    return with_output(out_path, [&](std::ostream& out) { return cmd_sensitivity(config, out, std::cerr); });
  if (*fit) {
    FitMode fm;
    try {
      fm = parse_fit_mode(mode);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInput;
    }
    return with_output(out_path, [&](std::ostream& out) { return cmd_fit(config, data_path, fm, out, std::cerr); });
  }
  if (*sample) {
    const std::optional<std::string> ref = reference.empty() ? std::nullopt : std::optional<std::string>(reference);
    return cmd_sample(config, out_dir, ref, std::cerr);
  }
  return kExitFailure;
}
