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

#ifndef KARMA_COMMANDS_H_
#define KARMA_COMMANDS_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "karma/scenario.h"

namespace karma {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitNonConvergence = 3,
};

enum class LogLevel { kError, kWarn, kInfo, kDebug };
LogLevel parse_log_level(std::string_view name);

// Level-filtered line logger.
class Logger {
 public:
  Logger(std::ostream& out, LogLevel level) : out_(&out), level_(level) {}
  void log(LogLevel level, std::string_view message) const;
  void error(std::string_view m) const { log(LogLevel::kError, m); }
  void warn(std::string_view m) const { log(LogLevel::kWarn, m); }
  void info(std::string_view m) const { log(LogLevel::kInfo, m); }
  void debug(std::string_view m) const { log(LogLevel::kDebug, m); }

 private:
  std::ostream* out_;
  LogLevel level_;
};

struct CommandContext {
  std::filesystem::path out_dir = "out";
  const Logger* logger = nullptr;
};

// policy.csv, distribution.csv, value.csv, equilibrium.json and
// diagnostics.jsonl under out_dir. kExitNonConvergence when not converged
// (artifacts are written either way).
int cmd_solve(const Scenario& scenario, const CommandContext& ctx);

// Runs every scheme of the scenario and writes reports.json and welfare.csv
// (plus traces.csv and traces.json when simulation.record_events is set).
// KARMA uses the equilibrium stored in policy_dir, or solves first (writing
// the equilibrium to out_dir/equilibrium) when policy_dir is empty.
int cmd_simulate(const Scenario& scenario,
                 const std::optional<std::filesystem::path>& policy_dir,
                 const CommandContext& ctx);

// Simulates COIN, DICT and TURN and writes the closed-form references next to
// the empirical reports (benchmark.json, welfare.csv).
int cmd_benchmark(const Scenario& scenario, const CommandContext& ctx);

// Parameters accepted by cmd_sweep.
std::vector<std::string> sweep_parameters();

// Solve and simulate at every value; one sweep.csv row per (value, scheme),
// where KARMA rows are labelled by payment rule. Failures at one point are
// recorded in the status column and the sweep continues.
int cmd_sweep(const Scenario& scenario, const std::string& parameter,
              const std::vector<double>& values, const std::vector<PaymentRule>& rules,
              const CommandContext& ctx);

}  // namespace karma

#endif  // KARMA_COMMANDS_H_
