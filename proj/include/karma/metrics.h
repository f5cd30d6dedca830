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

#ifndef KARMA_METRICS_H_
#define KARMA_METRICS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "karma/game_model.h"
#include "karma/simulation.h"

namespace karma {

// Mean over repeats and the Student-t 95% half-width (absent below 2 repeats).
struct MetricSummary {
  double mean = 0.0;
  std::optional<double> ci_halfwidth;
};

MetricSummary summarize(std::span<const double> samples);

struct TypeWelfare {
  double access = 0.0;  // long-run probability of being selected
  double reward = 0.0;  // long-run mean reward per interaction
};

struct TypeReport {
  MetricSummary access;
  MetricSummary reward;
};

struct WelfareReport {
  std::string scheme;
  MetricSummary efficiency;
  MetricSummary access_fairness;
  MetricSummary reward_fairness;
  std::vector<TypeReport> per_type;  // empirical, from the traces
  int n_repeats = 0;
};

// Population urgency mixture: distinct urgency values with their stationary
// probabilities, mixing types by share.
struct UrgencyMixture {
  std::vector<double> values;  // ascending
  std::vector<double> probabilities;
};
UrgencyMixture urgency_mixture(const Game& game);

// Sum over (tau, u, k) of d * R under the state's policy.
double efficiency_at_equilibrium(const Game& game, const SocialState& state);
// -E[u] / 2: the selected agent is independent of urgency.
double coin_efficiency(const Game& game);
// -E[min(u_i, u_j)] / 2 for independent draws from the urgency mixture.
double dict_efficiency(const Game& game);

std::vector<TypeWelfare> ex_ante_metrics(const Game& game, const SocialState& state);
// Per-type access and reward when the higher urgency value always wins.
std::vector<TypeWelfare> dict_ex_ante_metrics(const Game& game);

// The trace functions throw std::invalid_argument for traces without
// interactions.
double empirical_efficiency(const SimTrace& trace);
// Negated population standard deviations (divisor N).
double access_fairness(const SimTrace& trace);
double reward_fairness(const SimTrace& trace);
// Per-type mean access fraction and mean reward over the type's agents.
std::vector<TypeWelfare> empirical_type_metrics(const SimTrace& trace, int num_types);

WelfareReport aggregate_runs(std::span<const SimTrace> traces, int num_types);

}  // namespace karma

#endif  // KARMA_METRICS_H_
