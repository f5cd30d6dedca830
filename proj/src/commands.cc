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

#include "karma/commands.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "karma/artifacts.h"
#include "karma/metrics.h"

namespace karma {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const Logger& logger_of(const CommandContext& ctx) {
  static const Logger silent(std::clog, LogLevel::kError);
  return ctx.logger ? *ctx.logger : silent;
}

struct SolveOutcome {
  EquilibriumResult result;
  std::string diagnostics_jsonl;
};

SolveOutcome run_solver(const Scenario& scenario, const Game& game, const SolverParams& params,
                        const Logger& log) {
  std::string jsonl;
  IterationObserver observer = [&](const IterationRecord& r) {
    jsonl += iteration_json(r).dump() + "\n";
    std::ostringstream msg;
    msg << "iteration " << r.iteration << " stationarity " << r.stationarity_residual
        << " br_gap " << r.br_gap << " mean_karma " << r.mean_karma;
    log.debug(msg.str());
  };
  SolveOutcome out{solve(game, params, scenario.warm_start, observer), ""};
  json last = diagnostics_json(out.result.diagnostics);
  last["final"] = true;
  out.diagnostics_jsonl = jsonl + last.dump() + "\n";
  const SolverDiagnostics& d = out.result.diagnostics;
  std::ostringstream msg;
  msg << (d.converged ? "converged" : "not converged") << " after " << d.iterations
      << " iterations (stationarity " << d.stationarity_residual << ", br_gap " << d.br_gap
      << ")";
  log.info(msg.str());
  for (const std::string& w : d.warnings) log.warn(w);
  return out;
}

void write_solve_artifacts(const fs::path& dir, const Scenario& scenario, const Game& game,
                           const SolveOutcome& outcome) {
  Scenario snapshot = scenario;
  snapshot.warm_start.reset();
  write_equilibrium(dir, game, outcome.result, scenario_to_json(snapshot));
  atomic_write(dir / "diagnostics.jsonl", outcome.diagnostics_jsonl);
}

double histogram_l1(const SocialState& d, std::span<const SimTrace> traces) {
  double l1 = 0.0;
  for (int tau = 0; tau < d.num_types(); ++tau) {
    const std::span<const double> target = d.distribution(tau);
    for (std::size_t i = 0; i < target.size(); ++i) {
      double mean = 0.0;
      for (const SimTrace& t : traces) mean += t.histogram.frequency[tau][i];
      mean /= static_cast<double>(traces.size());
      l1 += std::abs(mean - target[i]);
    }
  }
  double overflow = 0.0;
  for (const SimTrace& t : traces) overflow += t.histogram.overflow;
  return l1 + overflow / static_cast<double>(traces.size());
}

// Quotes a CSV field that contains a separator or quote.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

double spread(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

Game apply_parameter(const Scenario& scenario, const std::string& parameter, double value,
                     SolverParams& params) {
  if (parameter == "alpha") return with_discount(scenario.game, value);
  if (parameter == "tax_coefficient") return with_tax_coefficient(scenario.game, value);
  if (parameter == "k_bar") {
    if (value != std::floor(value)) throw std::invalid_argument("k_bar must be an integer");
    return with_k_bar(scenario.game, static_cast<int>(value));
  }
  if (parameter == "lambda") {
    params.lambda = value;
    params.validate();
    return scenario.game;
  }
  throw std::invalid_argument("unknown sweep parameter '" + parameter + "'");
}

}  // namespace

LogLevel parse_log_level(std::string_view name) {
  if (name == "error") return LogLevel::kError;
  if (name == "warn") return LogLevel::kWarn;
  if (name == "info") return LogLevel::kInfo;
  if (name == "debug") return LogLevel::kDebug;
  throw std::invalid_argument("unknown log level '" + std::string(name) +
                              "' (expected error, warn, info or debug)");
}

void Logger::log(LogLevel level, std::string_view message) const {
  if (level > level_) return;
  static constexpr std::string_view kNames[] = {"error", "warn", "info", "debug"};
  *out_ << "[" << kNames[static_cast<int>(level)] << "] " << message << "\n";
}

int cmd_solve(const Scenario& scenario, const CommandContext& ctx) {
  const Logger& log = logger_of(ctx);
  const SolveOutcome outcome = run_solver(scenario, scenario.game, scenario.solver, log);
  write_solve_artifacts(ctx.out_dir, scenario, scenario.game, outcome);
  return outcome.result.diagnostics.converged ? kExitOk : kExitNonConvergence;
}

int cmd_simulate(const Scenario& scenario, const std::optional<fs::path>& policy_dir,
                 const CommandContext& ctx) {
  const Logger& log = logger_of(ctx);
  const Game& game = scenario.game;
  int status = kExitOk;
  std::optional<SocialState> policy;
  json doc = {{"scenario", scenario_to_json(scenario)}};
  doc["scenario"].erase("warm_start");
  const bool karma = std::find(scenario.schemes.begin(), scenario.schemes.end(),
                               Scheme::kKarma) != scenario.schemes.end();
  if (karma) {
    if (policy_dir) {
      policy = read_equilibrium(*policy_dir, game);
      log.info("loaded policy from " + policy_dir->string());
    } else {
      const SolveOutcome outcome = run_solver(scenario, game, scenario.solver, log);
      write_solve_artifacts(ctx.out_dir / "equilibrium", scenario, game, outcome);
      if (!outcome.result.diagnostics.converged) status = kExitNonConvergence;
      policy = outcome.result.social_state;
    }
    doc["equilibrium_efficiency"] = efficiency_at_equilibrium(game, *policy);
  }

  json reports = json::array();
  std::string csv = welfare_csv_header();
  std::vector<SimTrace> recorded;
  for (Scheme scheme : scenario.schemes) {
    const SimPolicy sim_policy{scheme, scheme == Scheme::kKarma ? &*policy : nullptr};
    std::vector<SimTrace> traces = run_simulation(game, sim_policy, scenario.simulation);
    const WelfareReport report = aggregate_runs(traces, game.num_types());
    json r = welfare_json(report);
    if (scheme == Scheme::kKarma && scenario.simulation.histogram_burn_in >= 0) {
      r["state_histogram_l1"] = histogram_l1(*policy, traces);
    }
    reports.push_back(std::move(r));
    csv += welfare_csv_row(report);
    log.info(std::string(to_string(scheme)) + ": eff " + format_double(report.efficiency.mean));
    if (scenario.simulation.record_events) {
      for (SimTrace& t : traces) recorded.push_back(std::move(t));
    }
  }
  doc["reports"] = std::move(reports);
  atomic_write(ctx.out_dir / "reports.json", doc.dump(2) + "\n");
  atomic_write(ctx.out_dir / "welfare.csv", csv);
  if (scenario.simulation.record_events) {
    atomic_write(ctx.out_dir / "traces.csv", trace_csv(recorded));
    json summaries = json::array();
    for (const SimTrace& t : recorded) summaries.push_back(trace_summary_json(t));
    atomic_write(ctx.out_dir / "traces.json", summaries.dump(2) + "\n");
  }
  return status;
}

int cmd_benchmark(const Scenario& scenario, const CommandContext& ctx) {
  const Logger& log = logger_of(ctx);
  const Game& game = scenario.game;
  json reports = json::array();
  std::string csv = welfare_csv_header();
  for (Scheme scheme : {Scheme::kCoin, Scheme::kDict, Scheme::kTurn}) {
    const std::vector<SimTrace> traces =
        run_simulation(game, SimPolicy{scheme, nullptr}, scenario.simulation);
    const WelfareReport report = aggregate_runs(traces, game.num_types());
    reports.push_back(welfare_json(report));
    csv += welfare_csv_row(report);
    log.info(std::string(to_string(scheme)) + ": eff " + format_double(report.efficiency.mean));
  }
  json dict_types = json::array();
  for (const TypeWelfare& t : dict_ex_ante_metrics(game)) {
    dict_types.push_back({{"access", t.access}, {"reward", t.reward}});
  }
  json doc = {{"scenario", scenario_to_json(scenario)},
              {"closed_form",
               {{"coin_efficiency", coin_efficiency(game)},
                {"dict_efficiency", dict_efficiency(game)},
                {"dict_per_type", dict_types}}},
              {"reports", reports}};
  doc["scenario"].erase("warm_start");
  atomic_write(ctx.out_dir / "benchmark.json", doc.dump(2) + "\n");
  atomic_write(ctx.out_dir / "welfare.csv", csv);
  return kExitOk;
}

std::vector<std::string> sweep_parameters() {
  return {"alpha", "tax_coefficient", "k_bar", "lambda"};
}

int cmd_sweep(const Scenario& scenario, const std::string& parameter,
              const std::vector<double>& values, const std::vector<PaymentRule>& rules,
              const CommandContext& ctx) {
  const std::vector<std::string> allowed = sweep_parameters();
  if (std::find(allowed.begin(), allowed.end(), parameter) == allowed.end()) {
    throw std::invalid_argument("unknown sweep parameter '" + parameter + "'");
  }
  const Logger& log = logger_of(ctx);
  std::string csv =
      "parameter,value,scheme,converged,eff,eff_ci,af,af_ci,rf,rf_ci,"
      "ex_ante_access_gap,mean_karma_gap,status\n";
  for (double value : values) {
    auto emit = [&](const std::string& scheme, const std::string& converged,
                    const WelfareReport* r, const std::string& access_gap,
                    const std::string& karma_gap, const std::string& status) {
      std::vector<std::string> fields{parameter, format_double(value), scheme, converged};
      for (const MetricSummary* m : {r ? &r->efficiency : nullptr,
                                     r ? &r->access_fairness : nullptr,
                                     r ? &r->reward_fairness : nullptr}) {
        fields.push_back(m ? format_double(m->mean) : "");
        fields.push_back(m && m->ci_halfwidth ? format_double(*m->ci_halfwidth) : "");
      }
      fields.insert(fields.end(), {access_gap, karma_gap, csv_field(status)});
      for (std::size_t i = 0; i < fields.size(); ++i) csv += (i ? "," : "") + fields[i];
      csv += "\n";
    };
    SolverParams params = scenario.solver;
    std::optional<Game> game;
    try {
      game = apply_parameter(scenario, parameter, value, params);
    } catch (const std::exception& e) {
      log.warn("sweep point " + format_double(value) + ": " + e.what());
      emit("", "", nullptr, "", "", std::string("error: ") + e.what());
      continue;
    }
    for (Scheme scheme : scenario.schemes) {
      if (scheme != Scheme::kKarma) {
        const std::string label(to_string(scheme));
        try {
          const std::vector<SimTrace> traces =
              run_simulation(*game, SimPolicy{scheme, nullptr}, scenario.simulation);
          const WelfareReport r = aggregate_runs(traces, game->num_types());
          emit(label, "", &r, "", "", "ok");
        } catch (const std::exception& e) {
          emit(label, "", nullptr, "", "", std::string("error: ") + e.what());
        }
        continue;
      }
      for (PaymentRule rule : rules) {
        const std::string label(to_string(rule));
        try {
          const Game point = with_payment_rule(*game, rule);
          Scenario local = scenario;
          local.game = point;
          local.solver = params;
          if (local.warm_start &&
              !local.warm_start->violations(point, 1e-6 * point.mechanism().k_bar()).empty()) {
            local.warm_start.reset();
          }
          const SolveOutcome outcome = run_solver(local, point, params, log);
          const SolverDiagnostics& diag = outcome.result.diagnostics;
          const SocialState& eq = outcome.result.social_state;
          const std::vector<SimTrace> traces =
              run_simulation(point, SimPolicy{Scheme::kKarma, &eq}, scenario.simulation);
          const WelfareReport r = aggregate_runs(traces, point.num_types());
          std::vector<double> access, karma;
          for (const TypeWelfare& t : ex_ante_metrics(point, eq)) access.push_back(t.access);
          for (int tau = 0; tau < point.num_types(); ++tau) karma.push_back(eq.mean_karma(tau));
          emit(label, diag.converged ? "true" : "false", &r, format_double(spread(access)),
               format_double(spread(karma)), diag.converged ? "ok" : "not_converged");
        } catch (const std::exception& e) {
          log.warn("sweep point " + format_double(value) + " " + label + ": " + e.what());
          emit(label, "false", nullptr, "", "", std::string("error: ") + e.what());
        }
      }
    }
  }
  atomic_write(ctx.out_dir / "sweep.csv", csv);
  return kExitOk;
}

}  // namespace karma
