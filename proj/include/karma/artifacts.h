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

#ifndef KARMA_ARTIFACTS_H_
#define KARMA_ARTIFACTS_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "karma/game_model.h"
#include "karma/metrics.h"
#include "karma/simulation.h"
#include "karma/solver.h"

namespace karma {

// Shortest form that still parses back to the same double ("%.17g").
std::string format_double(double x);

// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// Rows (type, urgency, karma); columns b0..b{k_max}.
std::string policy_csv(const SocialState& state);
// Rows (type, urgency, karma); column d.
std::string distribution_csv(const SocialState& state);
// Rows (type, urgency, karma); column value (V, or Y for average reward).
std::string value_csv(const SocialState& state, const ValueTable& value);

// Inverse of policy_csv + distribution_csv; validates the result against the
// game. Throws std::invalid_argument on malformed or mismatching files.
SocialState social_state_from_csv(const Game& game, std::string_view policy,
                                  std::string_view distribution);

nlohmann::json diagnostics_json(const SolverDiagnostics& diag);
nlohmann::json iteration_json(const IterationRecord& record);
nlohmann::json equilibrium_json(const Game& game, const EquilibriumResult& result);

// policy.csv, distribution.csv, value.csv and equilibrium.json under `dir`.
void write_equilibrium(const std::filesystem::path& dir, const Game& game,
                       const EquilibriumResult& result, const nlohmann::json& scenario);
// Reads policy.csv and distribution.csv from `dir`.
SocialState read_equilibrium(const std::filesystem::path& dir, const Game& game);

nlohmann::json welfare_json(const WelfareReport& report);
std::string welfare_csv_header();
std::string welfare_csv_row(const WelfareReport& report);

// One row per agent-interaction:
// repeat,round,agent,type,urgency,bid,outcome,reward,karma.
std::string trace_csv(std::span<const SimTrace> traces);
nlohmann::json trace_summary_json(const SimTrace& trace);

}  // namespace karma

#endif  // KARMA_ARTIFACTS_H_
