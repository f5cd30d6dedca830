// Copyright 2026 The Karma DPG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: solve, simulate, benchmark, sweep, validate.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "karma/artifacts.h"
#include "karma/commands.h"
#include "karma/scenario.h"

namespace {

using karma::Scenario;

// Flags that override scenario fields; unset flags leave the field alone.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> rule;
  std::optional<int> k_bar;
  std::optional<double> tax_coefficient;
  std::optional<double> lambda, dt, eta, fp_tol;
  std::optional<int> max_iters, log_every;
  std::optional<std::string> warm_start;
  std::optional<std::string> schemes;
  std::optional<int> n_agents, interactions, repeats, workers, histogram_burn_in;
  std::optional<std::string> init_karma, remainder;
  bool traces = false;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply(const Overrides& o, Scenario& s) {
  if (o.alpha) s.game = karma::with_discount(s.game, *o.alpha);
  if (o.rule) s.game = karma::with_payment_rule(s.game, karma::parse_payment_rule(*o.rule));
  if (o.k_bar) s.game = karma::with_k_bar(s.game, *o.k_bar);
  if (o.tax_coefficient) s.game = karma::with_tax_coefficient(s.game, *o.tax_coefficient);
  if (o.lambda) s.solver.lambda = *o.lambda;
  if (o.dt) s.solver.dt = *o.dt;
  if (o.eta) s.solver.eta = *o.eta;
  if (o.fp_tol) s.solver.fp_tol = *o.fp_tol;
  if (o.max_iters) s.solver.max_iters = *o.max_iters;
  if (o.log_every) s.solver.log_every = *o.log_every;
  s.solver.validate();
  if (o.seed) s.simulation.seed = *o.seed;
  if (o.n_agents) s.simulation.n_agents = *o.n_agents;
  if (o.interactions) s.simulation.interactions = *o.interactions;
  if (o.repeats) s.simulation.repeats = *o.repeats;
  if (o.workers) s.simulation.workers = *o.workers;
  if (o.histogram_burn_in) s.simulation.histogram_burn_in = *o.histogram_burn_in;
  if (o.init_karma) s.simulation.init_karma = karma::parse_init_karma(*o.init_karma);
  if (o.remainder) s.simulation.remainder = karma::parse_remainder_mode(*o.remainder);
  if (o.traces) s.simulation.record_events = true;
  s.simulation.validate();
  if (o.schemes) {
    s.schemes.clear();
    for (const std::string& name : split_list(*o.schemes)) {
      s.schemes.push_back(karma::parse_scheme(name));
    }
  }
  if (o.warm_start) {
    s.warm_start = karma::read_equilibrium(*o.warm_start, s.game);
  } else if (s.warm_start &&
             !s.warm_start->violations(s.game, 1e-6 * s.game.mechanism().k_bar()).empty()) {
    // A flag changed the game; the file's warm start no longer fits.
    s.warm_start.reset();
  }
}

void add_solver_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--alpha", o.alpha, "Discount factor for every type (1 = average reward)");
  cmd->add_option("--rule", o.rule, "Payment rule: PBP or PBS");
  cmd->add_option("--k-bar", o.k_bar, "Average karma per agent");
  cmd->add_option("--tax-coefficient", o.tax_coefficient, "Karma tax coefficient (0 disables)");
  cmd->add_option("--lambda", o.lambda, "Rationality of the perturbed best response");
  cmd->add_option("--dt", o.dt, "Euler step of the dynamics");
  cmd->add_option("--eta", o.eta, "Policy update rate");
  cmd->add_option("--fp-tol", o.fp_tol, "Fixed-point tolerance");
  cmd->add_option("--max-iters", o.max_iters, "Iteration limit of the dynamics");
  cmd->add_option("--log-every", o.log_every, "Diagnostics record interval (0 disables)");
  cmd->add_option("--warm-start", o.warm_start, "Directory with policy.csv and distribution.csv");
}

void add_simulation_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--schemes", o.schemes, "Comma-separated subset of KARMA,COIN,DICT,TURN");
  cmd->add_option("--n", o.n_agents, "Number of agents (even)");
  cmd->add_option("--t", o.interactions, "Interactions per agent");
  cmd->add_option("--repeats", o.repeats, "Independent repetitions");
  cmd->add_option("--workers", o.workers, "Parallel repeats (0 = hardware concurrency)");
  cmd->add_option("--histogram-burn-in", o.histogram_burn_in,
                  "Record the (u,k) histogram after this many rounds");
  cmd->add_option("--init-karma", o.init_karma, "point_mass_kbar or sample_from_d");
  cmd->add_option("--remainder", o.remainder, "Redistribution remainder: exact or carry");
  cmd->add_flag("--traces", o.traces, "Write per-interaction traces");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Karma mechanism equilibria, simulations and welfare metrics"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  std::string out_dir = "out";
  std::string log_level = "info";
  std::string scenario_ref;
  app.add_option("--seed", o.seed, "Simulation seed");
  app.add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  app.add_option("--log-level", log_level, "error, warn, info or debug")->capture_default_str();

  auto scenario_arg = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_ref, "Preset name or scenario JSON file")->required();
  };

  CLI::App* solve = app.add_subcommand("solve", "Compute a stationary Nash equilibrium");
  scenario_arg(solve);
  add_solver_flags(solve, o);

  std::optional<std::string> policy_dir;
  CLI::App* simulate = app.add_subcommand("simulate", "Agent-based simulation and welfare");
  scenario_arg(simulate);
  add_solver_flags(simulate, o);
  add_simulation_flags(simulate, o);
  simulate->add_option("--policy", policy_dir, "Equilibrium directory from `solve`");

  CLI::App* benchmark = app.add_subcommand("benchmark", "Simulate COIN, DICT and TURN");
  scenario_arg(benchmark);
  add_simulation_flags(benchmark, o);

  std::string parameter;
  std::string values_text;
  std::optional<std::string> rules_text;
  CLI::App* sweep = app.add_subcommand("sweep", "Solve and simulate over a parameter grid");
  scenario_arg(sweep);
  add_solver_flags(sweep, o);
  add_simulation_flags(sweep, o);
  sweep->add_option("--param", parameter, "alpha, tax_coefficient, k_bar or lambda")->required();
  sweep->add_option("--values", values_text, "Comma-separated values (may be empty)");
  sweep->add_option("--rules", rules_text, "Payment rules for KARMA rows, e.g. PBP,PBS");

  bool print = false;
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario and exit");
  scenario_arg(validate);
  validate->add_flag("--print", print, "Print the normalized scenario JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? karma::kExitOk : karma::kExitValidation;
  }

  karma::LogLevel level;
  try {
    level = karma::parse_log_level(log_level);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return karma::kExitValidation;
  }
  const karma::Logger logger(std::cerr, level);

  std::optional<Scenario> scenario;
  std::vector<double> values;
  std::vector<karma::PaymentRule> rules;
  try {
    scenario = karma::load_scenario(scenario_ref);
    apply(o, *scenario);
    if (*sweep) {
      for (const std::string& v : split_list(values_text)) {
        std::size_t used = 0;
        values.push_back(std::stod(v, &used));
        if (used != v.size()) throw std::invalid_argument("bad sweep value '" + v + "'");
      }
      if (rules_text) {
        for (const std::string& r : split_list(*rules_text)) {
          rules.push_back(karma::parse_payment_rule(r));
        }
      } else {
        rules.push_back(scenario->game.mechanism().payment_rule());
      }
    }
  } catch (const karma::ScenarioError& e) {
    logger.error(e.what());
    return karma::kExitValidation;
  } catch (const std::exception& e) {
    logger.error(std::string("invalid input: ") + e.what());
    return karma::kExitValidation;
  }

  const karma::CommandContext ctx{out_dir, &logger};
  try {
    if (*validate) {
      if (print) std::cout << karma::scenario_to_json(*scenario).dump(2) << "\n";
      logger.info("scenario is valid");
      return karma::kExitOk;
    }
    if (*solve) return karma::cmd_solve(*scenario, ctx);
    if (*simulate) {
      std::optional<std::filesystem::path> dir;
      if (policy_dir) dir = *policy_dir;
      return karma::cmd_simulate(*scenario, dir, ctx);
    }
    if (*benchmark) return karma::cmd_benchmark(*scenario, ctx);
    if (*sweep) return karma::cmd_sweep(*scenario, parameter, values, rules, ctx);
  } catch (const std::invalid_argument& e) {
    logger.error(e.what());
    return karma::kExitValidation;
  } catch (const std::exception& e) {
    logger.error(e.what());
    return karma::kExitFailure;
  }
  return karma::kExitFailure;
}
