// Copyright 2026 The spinbarrier Authors
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

// spinbarrier: run, sweep, plot, gate, selftest.

#include <spinbarrier/cli.hpp>

#include <CLI11.hpp>

#include <string>
#include <vector>

namespace {

void add_common(CLI::App* cmd, spinbarrier::cli::CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "scenario config file");
  cmd->add_option("--set", opts.overrides, "override a config key, section.key=value (repeatable)")
      ->expected(1)
      ->take_all();
  cmd->add_option("--seed", opts.seed, "trajectory master seed");
  cmd->add_option("--trajectories", opts.trajectories, "number of trajectories");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = spinbarrier::cli;
  CLI::App app{"Qubit decoupling by a laser-cycled barrier: simulations and gate extraction"};
  app.require_subcommand(1);

  cli::CommonOptions run_opts;
  std::string run_out = "out";
  auto* run = app.add_subcommand("run", "run one scenario");
  add_common(run, run_opts);
  run->add_option("--scenario", run_opts.default_scenario, "scenario when no --config is given");
  run->add_option("--out", run_out, "output directory");

  cli::CommonOptions sweep_opts;
  std::string sweep_out = "sweep";
  std::string axis;
  std::string values;
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run one scenario over a list of values of a config key");
  add_common(sweep, sweep_opts);
  sweep->add_option("--scenario", sweep_opts.default_scenario, "scenario when no --config is given");
  sweep->add_option("--axis", axis, "numeric config key, e.g. decay.gamma")->required();
  sweep->add_option("--values", values, "comma-separated values, e.g. 0,4,13,40")->required();
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  std::vector<std::string> plot_inputs;
  std::string plot_out = "plot.svg";
  auto* plot = app.add_subcommand("plot", "draw F(t) from trace.csv files into one SVG");
  plot->add_option("traces", plot_inputs, "trace.csv files")->required();
  plot->add_option("--out", plot_out, "SVG file");

  cli::CommonOptions gate_opts;
  std::string gate_out = "gate";
  int repetitions = 1;
  auto* gate = app.add_subcommand("gate", "extract the two-qubit gate of the qubit-barrier-qubit chain");
  add_common(gate, gate_opts);
  gate->add_option("--repetitions", repetitions, "number of revival periods")->check(CLI::PositiveNumber);
  gate->add_option("--out", gate_out, "output directory");

  auto* selftest = app.add_subcommand("selftest", "run the invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(spinbarrier::ErrorCategory::config);
  }

  if (*run) return cli::guarded([&] { return cli::run(run_opts, run_out); });
  if (*sweep) return cli::guarded([&] { return cli::sweep(sweep_opts, axis, values, sweep_out, jobs); });
  if (*plot) {
    return cli::guarded([&] {
      std::vector<std::filesystem::path> paths(plot_inputs.begin(), plot_inputs.end());
      return cli::plot(paths, plot_out);
    });
  }
  if (*gate) return cli::guarded([&] { return cli::gate(gate_opts, repetitions, gate_out); });
  if (*selftest) return cli::guarded([] { return cli::selftest(); });
  return 0;
}
