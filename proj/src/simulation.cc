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

#include "karma/simulation.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace karma {
namespace {

bool coin(Rng& rng) { return std::bernoulli_distribution(0.5)(rng); }

std::vector<int> type_counts(const Game& game, int n,
                             std::vector<std::string>* warnings) {
  const int n_types = game.num_types();
  std::vector<int> counts(n_types);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  bool exact = true;
  for (int tau = 0; tau < n_types; ++tau) {
    const double ideal = n * game.type(tau).share;
    counts[tau] = static_cast<int>(std::floor(ideal));
    assigned += counts[tau];
    const double frac = ideal - counts[tau];
    if (frac > 1e-9 && frac < 1.0 - 1e-9) exact = false;
    remainders.push_back({frac, tau});
  }
  // Larger remainders first; ties go to the lower type index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i].second];
  if (!exact && warnings) {
    warnings->push_back("type shares are not representable with " +
                        std::to_string(n) + " agents; rounded by largest remainder");
  }
  return counts;
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kKarma: return "KARMA";
    case Scheme::kCoin: return "COIN";
    case Scheme::kDict: return "DICT";
    case Scheme::kTurn: return "TURN";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "KARMA") return Scheme::kKarma;
  if (name == "COIN") return Scheme::kCoin;
  if (name == "DICT") return Scheme::kDict;
  if (name == "TURN") return Scheme::kTurn;
  throw std::invalid_argument("unknown scheme '" + std::string(name) +
                              "' (expected KARMA, COIN, DICT or TURN)");
}

std::string_view to_string(InitKarma mode) {
  return mode == InitKarma::kPointMassKbar ? "point_mass_kbar" : "sample_from_d";
}

InitKarma parse_init_karma(std::string_view name) {
  if (name == "point_mass_kbar") return InitKarma::kPointMassKbar;
  if (name == "sample_from_d") return InitKarma::kSampleFromD;
  throw std::invalid_argument("unknown init_karma '" + std::string(name) +
                              "' (expected point_mass_kbar or sample_from_d)");
}

std::string_view to_string(RemainderMode mode) {
  return mode == RemainderMode::kExact ? "exact" : "carry";
}

RemainderMode parse_remainder_mode(std::string_view name) {
  if (name == "exact") return RemainderMode::kExact;
  if (name == "carry") return RemainderMode::kCarry;
  throw std::invalid_argument("unknown remainder mode '" + std::string(name) +
                              "' (expected exact or carry)");
}

std::int64_t Population::total_karma() const {
  std::int64_t total = surplus;
  for (const Agent& a : agents) total += a.karma;
  return total;
}

Population init_population(const Game& game, int n_agents, InitKarma mode,
                           const SocialState* distribution, Rng& rng,
                           std::vector<std::string>* warnings) {
  if (n_agents <= 0 || n_agents % 2 != 0) {
    throw std::invalid_argument("n_agents must be positive and even, got " +
                                std::to_string(n_agents));
  }
  if (mode == InitKarma::kSampleFromD && distribution == nullptr) {
    throw std::invalid_argument("init_karma sample_from_d needs a distribution");
  }
  const int k_bar = game.mechanism().k_bar();
  const int levels = game.karma_levels();
  const std::vector<int> counts = type_counts(game, n_agents, warnings);
  Population pop;
  pop.agents.reserve(n_agents);
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const UrgencyChain& chain = game.type(tau).urgency;
    if (mode == InitKarma::kPointMassKbar) {
      const std::vector<double> mu = chain.stationary_distribution();
      std::discrete_distribution<int> draw(mu.begin(), mu.end());
      for (int i = 0; i < counts[tau]; ++i) pop.agents.push_back({tau, draw(rng), k_bar});
    } else {
      const std::span<const double> d = distribution->distribution(tau);
      std::discrete_distribution<int> draw(d.begin(), d.end());
      for (int i = 0; i < counts[tau]; ++i) {
        const int s = draw(rng);
        pop.agents.push_back({tau, s / levels, s % levels});
      }
    }
  }
  const std::int64_t target = static_cast<std::int64_t>(n_agents) * k_bar;
  std::uniform_int_distribution<int> pick(0, n_agents - 1);
  std::int64_t total = pop.total_karma();
  while (total < target) {
    ++pop.agents[pick(rng)].karma;
    ++total;
  }
  while (total > target) {
    Agent& a = pop.agents[pick(rng)];
    if (a.karma > 0) {
      --a.karma;
      --total;
    }
  }
  return pop;
}

Redistribution integer_redistribute(std::int64_t surplus, int n_agents, Rng& rng,
                                    RemainderMode mode) {
  if (n_agents <= 0) throw std::invalid_argument("integer_redistribute: n_agents must be > 0");
  if (surplus < 0) throw std::invalid_argument("integer_redistribute: surplus must be >= 0");
  Redistribution out;
  out.amounts.assign(n_agents, surplus / n_agents);
  const std::int64_t remainder = surplus % n_agents;
  if (mode == RemainderMode::kCarry) {
    out.remainder = remainder;
    return out;
  }
  if (remainder > 0) {
    std::vector<int> idx(n_agents);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> lucky;
    lucky.reserve(remainder);
    std::sample(idx.begin(), idx.end(), std::back_inserter(lucky), remainder, rng);
    for (int i : lucky) ++out.amounts[i];
  }
  return out;
}

int benchmark_allocate(Scheme scheme, double urgency_a, double urgency_b,
                       const AccessHistory& history_a,
                       const AccessHistory& history_b, Rng& rng) {
  switch (scheme) {
    case Scheme::kCoin:
      return coin(rng) ? 0 : 1;
    case Scheme::kDict:
      if (urgency_a != urgency_b) return urgency_a > urgency_b ? 0 : 1;
      return coin(rng) ? 0 : 1;
    case Scheme::kTurn: {
      // Compare wins_a / n_a with wins_b / n_b exactly; n = 0 counts as 0.
      const std::int64_t lhs = history_a.interactions == 0
                                   ? 0
                                   : history_a.wins * std::max<std::int64_t>(history_b.interactions, 1);
      const std::int64_t rhs = history_b.interactions == 0
                                   ? 0
                                   : history_b.wins * std::max<std::int64_t>(history_a.interactions, 1);
      if (lhs != rhs) return lhs < rhs ? 0 : 1;
      return coin(rng) ? 0 : 1;
    }
    case Scheme::kKarma:
      break;
  }
  throw std::invalid_argument("benchmark_allocate: KARMA is not a benchmark scheme");
}

void SimConfig::validate() const {
  std::vector<std::string> problems;
  if (n_agents <= 0 || n_agents % 2 != 0) problems.push_back("n_agents must be positive and even");
  if (interactions < 0) problems.push_back("interactions must be >= 0");
  if (repeats < 1) problems.push_back("repeats must be >= 1");
  if (workers < 0) problems.push_back("workers must be >= 0");
  if (!problems.empty()) {
    std::string msg = "simulation config: ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw std::invalid_argument(msg);
  }
}

Rng repeat_rng(std::uint64_t seed, int repeat) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repeat)};
  return Rng(seq);
}

Simulator::Simulator(const Game& game, SimPolicy policy, Population population,
                     RemainderMode remainder)
    : game_(&game),
      policy_(policy),
      population_(std::move(population)),
      remainder_(remainder),
      total_karma_(population_.total_karma()),
      history_(population_.agents.size()),
      order_(population_.agents.size()) {
  if (policy_.scheme == Scheme::kKarma) {
    if (policy_.policy == nullptr) throw std::invalid_argument("KARMA simulation needs a policy");
    const SocialState& s = *policy_.policy;
    if (s.num_types() != game.num_types() || s.karma_levels() != game.karma_levels()) {
      throw std::invalid_argument("policy dimensions do not match the game");
    }
    for (int tau = 0; tau < game.num_types(); ++tau) {
      if (s.num_urgency(tau) != game.num_urgency(tau)) {
        throw std::invalid_argument("policy dimensions do not match the game");
      }
    }
  }
  std::iota(order_.begin(), order_.end(), 0);
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const UrgencyChain& chain = game.type(tau).urgency;
    urgency_step_.emplace_back();
    bid_draw_.emplace_back();
    for (int u = 0; u < chain.num_states(); ++u) {
      const std::span<const double> row = chain.row(u);
      urgency_step_[tau].emplace_back(row.begin(), row.end());
      if (policy_.scheme != Scheme::kKarma) continue;
      for (int k = 0; k < game.karma_levels(); ++k) {
        const std::span<const double> p = policy_.policy->policy(tau, u, k);
        bid_draw_[tau].emplace_back(p.begin(), p.end());
      }
    }
  }
}

int Simulator::sample_bid(const Agent& agent, Rng& rng) {
  const int levels = game_->karma_levels();
  const int row = static_cast<int>(std::min<std::int64_t>(agent.karma, levels - 1));
  const int bid = bid_draw_[agent.type][agent.urgency * levels + row](rng);
  if (bid > agent.karma) throw std::logic_error("sampled bid exceeds the bidder's karma");
  return bid;
}

std::int64_t Simulator::sample_tax(std::int64_t karma, Rng& rng) const {
  const double h = game_->mechanism().tax()->amount(static_cast<int>(
      std::min<std::int64_t>(karma, std::numeric_limits<int>::max())));
  const double lo = std::floor(h);
  std::int64_t due = static_cast<std::int64_t>(lo);
  if (h > lo && std::bernoulli_distribution(h - lo)(rng)) ++due;
  return std::min(due, karma);
}

void Simulator::step(int round, Rng& rng, std::vector<SimEvent>* events,
                     std::vector<double>* rewards) {
  std::vector<Agent>& agents = population_.agents;
  const int n = static_cast<int>(agents.size());
  const bool karma = policy_.scheme == Scheme::kKarma;
  const PaymentRule rule = game_->mechanism().payment_rule();
  std::shuffle(order_.begin(), order_.end(), rng);

  std::vector<int> bid(n, -1);
  std::vector<int> outcome(n, 0);
  std::vector<double> reward(n, 0.0);
  for (int m = 0; m < n; m += 2) {
    const int a = order_[m];
    const int b = order_[m + 1];
    const double ua = game_->type(agents[a].type).urgency.value(agents[a].urgency);
    const double ub = game_->type(agents[b].type).urgency.value(agents[b].urgency);
    int winner;
    if (karma) {
      bid[a] = sample_bid(agents[a], rng);
      bid[b] = sample_bid(agents[b], rng);
      winner = bid[a] != bid[b] ? (bid[a] > bid[b] ? 0 : 1) : (coin(rng) ? 0 : 1);
    } else {
      winner = benchmark_allocate(policy_.scheme, ua, ub, history_[a], history_[b], rng);
    }
    const int w = winner == 0 ? a : b;
    const int l = winner == 0 ? b : a;
    outcome[l] = 1;
    reward[l] = -(winner == 0 ? ub : ua);
    if (karma) {
      agents[w].karma -= bid[w];
      if (rule == PaymentRule::kPayBidToPeer) {
        agents[l].karma += bid[w];
      } else {
        population_.surplus += bid[w];
      }
    }
    ++history_[w].wins;
    ++history_[a].interactions;
    ++history_[b].interactions;
  }

  if (karma && rule == PaymentRule::kPayBidToSociety) {
    const Redistribution r = integer_redistribute(population_.surplus, n, rng, remainder_);
    for (int i = 0; i < n; ++i) agents[i].karma += r.amounts[i];
    population_.surplus = r.remainder;
  }
  if (karma && game_->mechanism().tax()) {
    for (Agent& agent : agents) {
      const std::int64_t due = sample_tax(agent.karma, rng);
      agent.karma -= due;
      population_.surplus += due;
    }
    const Redistribution r = integer_redistribute(population_.surplus, n, rng, remainder_);
    for (int i = 0; i < n; ++i) agents[i].karma += r.amounts[i];
    population_.surplus = r.remainder;
  }

  std::int64_t total = population_.surplus;
  for (const Agent& agent : agents) {
    if (agent.karma < 0) throw std::logic_error("negative karma");
    total += agent.karma;
  }
  if (total != total_karma_) throw std::logic_error("karma is not conserved");

  if (events) {
    for (int i = 0; i < n; ++i) {
      const Agent& agent = agents[i];
      events->push_back({round, i, agent.type,
                         game_->type(agent.type).urgency.value(agent.urgency), bid[i],
                         outcome[i], reward[i], agent.karma});
    }
  }
  if (rewards) {
    for (int i = 0; i < n; ++i) (*rewards)[i] += reward[i];
  }
  for (Agent& agent : agents) agent.urgency = urgency_step_[agent.type][agent.urgency](rng);
}

namespace {

SimTrace run_one(const Game& game, const SimPolicy& policy, const SimConfig& config,
                 int repeat) {
  Rng rng = repeat_rng(config.seed, repeat);
  SimTrace trace;
  trace.scheme = policy.scheme;
  trace.repeat = repeat;
  trace.seed = config.seed;
  trace.rounds = config.interactions;
  Population pop = init_population(game, config.n_agents, config.init_karma, policy.policy,
                                   rng, &trace.warnings);
  for (const Agent& a : pop.agents) trace.agent_type.push_back(a.type);
  trace.total_karma = pop.total_karma();
  Simulator sim(game, policy, std::move(pop), config.remainder);

  const int levels = game.karma_levels();
  const bool histogram = config.histogram_burn_in >= 0;
  if (histogram) {
    for (int tau = 0; tau < game.num_types(); ++tau) {
      trace.histogram.frequency.emplace_back(game.num_urgency(tau) * levels, 0.0);
    }
  }
  trace.reward_sum.assign(config.n_agents, 0.0);
  for (int t = 0; t < config.interactions; ++t) {
    if (histogram && t >= config.histogram_burn_in) {
      for (const Agent& a : sim.population().agents) {
        if (a.karma < levels) {
          trace.histogram.frequency[a.type][a.urgency * levels + a.karma] += 1.0;
        } else {
          trace.histogram.overflow += 1.0;
        }
      }
      trace.histogram.samples += config.n_agents;
    }
    sim.step(t, rng, config.record_events ? &trace.events : nullptr, &trace.reward_sum);
    if (config.record_events) trace.round_surplus.push_back(sim.population().surplus);
  }
  if (histogram && trace.histogram.samples > 0) {
    const double total = static_cast<double>(trace.histogram.samples);
    for (auto& f : trace.histogram.frequency) {
      for (double& x : f) x /= total;
    }
    trace.histogram.overflow /= total;
  }
  for (const AccessHistory& h : sim.history()) {
    trace.wins.push_back(h.wins);
    trace.interactions.push_back(h.interactions);
  }
  return trace;
}

}  // namespace

std::vector<SimTrace> run_simulation(const Game& game, const SimPolicy& policy,
                                     const SimConfig& config) {
  config.validate();
  if (policy.scheme == Scheme::kKarma && policy.policy == nullptr) {
    throw std::invalid_argument("KARMA simulation needs a policy");
  }
  std::vector<SimTrace> traces(config.repeats);
  const int workers = std::max(
      1, std::min(config.repeats, config.workers > 0
                                      ? config.workers
                                      : static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int r = next++; r < config.repeats; r = next++) {
      try {
        traces[r] = run_one(game, policy, config, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
  return traces;
}

}  // namespace karma
