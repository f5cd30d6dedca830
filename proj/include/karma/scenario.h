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

#ifndef KARMA_SCENARIO_H_
#define KARMA_SCENARIO_H_

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "karma/game_model.h"
#include "karma/simulation.h"
#include "karma/solver.h"

namespace karma {

// Itemized validation failure; each item is "field.path: problem".
class ScenarioError : public std::invalid_argument {
 public:
  explicit ScenarioError(std::vector<std::string> items);
  const std::vector<std::string>& items() const { return items_; }

 private:
  std::vector<std::string> items_;
};

struct Scenario {
  std::string name;
  Game game;
  SolverParams solver;
  SimConfig simulation;
  std::vector<Scheme> schemes;
  std::optional<SocialState> warm_start;
};

// Throws ScenarioError listing every problem found.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

// Reads and validates a scenario file. Throws ScenarioError (including for
// unreadable files and malformed JSON).
Scenario parse_scenario(const std::filesystem::path& path);

// Bundled presets: case_study_5_2, hetero_alpha, hetero_alpha_tax,
// invaders_10pct.
std::vector<std::string> preset_names();
// Throws std::invalid_argument for unknown names.
Scenario preset_scenario(const std::string& name);

// Preset name or path to a scenario file.
Scenario load_scenario(const std::string& name_or_path);

// Copies of a game with one parameter changed.
Game with_discount(const Game& game, double discount);
Game with_payment_rule(const Game& game, PaymentRule rule);
Game with_tax_coefficient(const Game& game, double coefficient);
Game with_k_bar(const Game& game, int k_bar);

// Urgency chain of the default / intermediate / high process with values
// (1, 1, 10): default -> intermediate w.p. `escalation`, intermediate ->
// intermediate or high w.p. 1/2 each, high -> default 0.95, intermediate 0.05.
// The stationary time at u = 10 is 1 / (0.95 / escalation + 3).
UrgencyChain three_state_chain(double escalation);

}  // namespace karma

#endif  // KARMA_SCENARIO_H_
