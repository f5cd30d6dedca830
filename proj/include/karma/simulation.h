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

#ifndef KARMA_SIMULATION_H_
#define KARMA_SIMULATION_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "karma/game_model.h"

namespace karma {

// KARMA runs the mechanism under a bidding policy; the others are the
// benchmark allocation rules.
enum class Scheme { kKarma, kCoin, kDict, kTurn };

std::string_view to_string(Scheme scheme);
// Accepts KARMA, COIN, DICT, TURN; throws std::invalid_argument otherwise.
Scheme parse_scheme(std::string_view name);

enum class InitKarma { kPointMassKbar, kSampleFromD };
std::string_view to_string(InitKarma mode);
InitKarma parse_init_karma(std::string_view name);

enum class RemainderMode {
  kExact,  // the whole pool is paid out every round
  kCarry,  // only floor(S / n) per agent; the remainder stays in the pool
};
std::string_view to_string(RemainderMode mode);
RemainderMode parse_remainder_mode(std::string_view name);

using Rng = std::mt19937_64;

struct Agent {
  int type = 0;
  int urgency = 0;  // state index in the type's urgency chain
  std::int64_t karma = 0;
};

struct Population {
  std::vector<Agent> agents;
  std::int64_t surplus = 0;

  std::int64_t total_karma() const;  // sum of agent karma plus surplus
};

// Type counts follow the shares by largest-remainder rounding (a warning is
// appended when the shares are not exactly representable). kSampleFromD draws
// (u, k) from the per-type conditional of `distribution` and then moves single
// karma units to or from random agents until the total is exactly n * k_bar.
// Throws std::invalid_argument for odd or non-positive n, or kSampleFromD
// without a distribution.
Population init_population(const Game& game, int n_agents, InitKarma mode,
                           const SocialState* distribution, Rng& rng,
                           std::vector<std::string>* warnings = nullptr);

struct Redistribution {
  std::vector<std::int64_t> amounts;
  std::int64_t remainder = 0;  // left in the pool (carry mode only)
};

// floor(surplus / n) to everyone; in exact mode the remainder r goes as +1 to
// r distinct agents drawn uniformly at random.
Redistribution integer_redistribute(std::int64_t surplus, int n_agents, Rng& rng,
                                    RemainderMode mode = RemainderMode::kExact);

// Past-access record used by TURN.
struct AccessHistory {
  std::int64_t wins = 0;
  std::int64_t interactions = 0;
};

// Winner of a benchmark competition: 0 for the first agent, 1 for the second.
// Throws std::invalid_argument for Scheme::kKarma.
int benchmark_allocate(Scheme scheme, double urgency_a, double urgency_b,
                       const AccessHistory& history_a,
                       const AccessHistory& history_b, Rng& rng);

struct SimEvent {
  int round = 0;
  int agent = 0;
  int type = 0;
  double urgency = 0.0;
  int bid = -1;     // -1 for benchmark schemes
  int outcome = 0;  // 0 selected, 1 yield
  double reward = 0.0;
  std::int64_t karma = 0;  // after the round's payments, redistribution and tax
};

// Time-averaged empirical (type, u, k) frequencies over the rounds after
// burn-in, recorded at the start of each round. Karma above k_max is counted in
// `overflow` only.
struct StateHistogram {
  std::vector<std::vector<double>> frequency;  // [type][u * levels + k]
  double overflow = 0.0;
  std::int64_t samples = 0;
};

struct SimConfig {
  int n_agents = 200;
  int interactions = 1000;  // T: rounds, one interaction per agent each
  int repeats = 10;
  std::uint64_t seed = 0;
  InitKarma init_karma = InitKarma::kPointMassKbar;
  RemainderMode remainder = RemainderMode::kExact;
  bool record_events = false;
  int histogram_burn_in = -1;  // < 0 disables the histogram
  int workers = 0;             // 0 picks the hardware concurrency

  void validate() const;
  bool operator==(const SimConfig&) const = default;
};

struct SimTrace {
  Scheme scheme = Scheme::kCoin;
  int repeat = 0;
  std::uint64_t seed = 0;
  int rounds = 0;
  std::vector<int> agent_type;
  std::vector<std::int64_t> wins;
  std::vector<std::int64_t> interactions;
  std::vector<double> reward_sum;
  std::int64_t total_karma = 0;  // karma + surplus, constant over the run
  std::vector<std::int64_t> round_surplus;  // pool after each round (events only)
  std::vector<SimEvent> events;             // filled when record_events
  StateHistogram histogram;
  std::vector<std::string> warnings;
};

// The policy or scheme that drives a simulation. `policy` is required for
// kKarma and must match the game's dimensions.
struct SimPolicy {
  Scheme scheme = Scheme::kCoin;
  const SocialState* policy = nullptr;
};

// Deterministic per-repeat generator derived from (seed, repeat).
Rng repeat_rng(std::uint64_t seed, int repeat);

// Stateful single-run engine: one call to step() is one synchronous round.
class Simulator {
 public:
  Simulator(const Game& game, SimPolicy policy, Population population,
            RemainderMode remainder);

  const Population& population() const { return population_; }
  const std::vector<AccessHistory>& history() const { return history_; }

  // Random perfect matching, bids, allocation, payments, redistribution, tax
  // and urgency transitions. Throws std::logic_error if karma conservation or
  // non-negativity is ever violated.
  void step(int round, Rng& rng, std::vector<SimEvent>* events = nullptr,
            std::vector<double>* rewards = nullptr);

 private:
  int sample_bid(const Agent& agent, Rng& rng);
  std::int64_t sample_tax(std::int64_t karma, Rng& rng) const;

  const Game* game_;
  SimPolicy policy_;
  Population population_;
  RemainderMode remainder_;
  std::int64_t total_karma_;
  std::vector<AccessHistory> history_;
  std::vector<int> order_;
  std::vector<std::vector<std::discrete_distribution<int>>> urgency_step_;  // [type][u]
  std::vector<std::vector<std::discrete_distribution<int>>> bid_draw_;  // [type][u*L+k]
};

// One SimTrace per repeat; repeats run in parallel with independent
// generators and the result does not depend on the number of workers.
std::vector<SimTrace> run_simulation(const Game& game, const SimPolicy& policy,
                                     const SimConfig& config);

}  // namespace karma

#endif  // KARMA_SIMULATION_H_
