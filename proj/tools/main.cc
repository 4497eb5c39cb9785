// Copyright 2026 The hybridsens Authors
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

// hybridsens: simulate, sweep, sensitivity and check commands.
//
// Exit status: 0 on success, 1 for configuration errors, 2 when the
// trajectory is not admissible (grazing, Zeno, event at the horizon, ...).

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hybridsens/cli.hpp"

namespace {

struct Overrides {
  std::optional<double> tol_a, tol_event, tol_cluster, tol_graze, h_fd, rtol,
      atol;
  std::optional<int> max_events;

  void apply(hybridsens::SolverConfig& c) const {
    if (tol_a) c.tol_a = *tol_a;
    if (tol_event) c.tol_event = *tol_event;
    if (tol_cluster) c.tol_cluster = *tol_cluster;
    if (tol_graze) c.tol_graze = *tol_graze;
    if (h_fd) c.h_fd = *h_fd;
    if (rtol) c.rtol = *rtol;
    if (atol) c.atol = *atol;
    if (max_events) c.max_events = *max_events;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven simulation and saltation sensitivity for "
               "mechanical systems with unilateral constraints"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = ".";
  long seed = 0;
  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "reserved; all computation is deterministic");
    sub->add_option("--tol-a", ov.tol_a);
    sub->add_option("--tol-event", ov.tol_event);
    sub->add_option("--tol-cluster", ov.tol_cluster);
    sub->add_option("--tol-graze", ov.tol_graze);
    sub->add_option("--h-fd", ov.h_fd);
    sub->add_option("--rtol", ov.rtol);
    sub->add_option("--atol", ov.atol);
    sub->add_option("--max-events", ov.max_events);
  };
  CLI::App* sim = app.add_subcommand("simulate", "write trajectory.csv and word.json");
  CLI::App* sweep = app.add_subcommand("sweep", "write sweep.csv and words.json");
  CLI::App* sens = app.add_subcommand(
      "sensitivity", "write sensitivity.json (D phi, saltation, FD oracle)");
  CLI::App* check = app.add_subcommand("check", "write check.json");
  for (CLI::App* sub : {sim, sweep, sens, check}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    hybridsens::Scenario s = hybridsens::load_scenario(scenario_path);
    ov.apply(s.config);
    s.config.validate();
    if (sim->parsed()) {
      hybridsens::cmd_simulate(s, out_dir);
    } else if (sweep->parsed()) {
      hybridsens::cmd_sweep(s, out_dir);
    } else if (sens->parsed()) {
      hybridsens::cmd_sensitivity(s, out_dir);
    } else {
      hybridsens::cmd_check(s, out_dir);
    }
  } catch (const hybridsens::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hybridsens::is_admissibility_error(e) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
