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

#include "karma/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "karma/interaction_kernel.h"

namespace karma {
namespace {

double population_std(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

void require_interactions(const SimTrace& trace) {
  if (trace.agent_type.empty() || trace.rounds <= 0) {
    throw std::invalid_argument("trace has no interactions");
  }
}

}  // namespace

MetricSummary summarize(std::span<const double> samples) {
  MetricSummary out;
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size());
  for (double v : samples) out.mean += v;
  out.mean /= n;
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double v : samples) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  out.ci_halfwidth = boost::math::quantile(dist, 0.975) * sd / std::sqrt(n);
  return out;
}

UrgencyMixture urgency_mixture(const Game& game) {
  std::map<double, double> mass;
  for (const AgentType& type : game.types()) {
    const std::vector<double> mu = type.urgency.stationary_distribution();
    for (int u = 0; u < type.urgency.num_states(); ++u) {
      mass[type.urgency.value(u)] += type.share * mu[u];
    }
  }
  UrgencyMixture out;
  for (const auto& [value, p] : mass) {
    out.values.push_back(value);
    out.probabilities.push_back(p);
  }
  return out;
}

double efficiency_at_equilibrium(const Game& game, const SocialState& state) {
  const InteractionKernel kernel(game, state);
  double eff = 0.0;
  for (int tau = 0; tau < game.num_types(); ++tau) {
    for (int u = 0; u < game.num_urgency(tau); ++u) {
      for (int k = 0; k < game.karma_levels(); ++k) {
        const double d = state.d(tau, u, k);
        if (d != 0.0) eff += d * kernel.policy_reward(tau, u, k);
      }
    }
  }
  return eff;
}

double coin_efficiency(const Game& game) {
  const UrgencyMixture m = urgency_mixture(game);
  double mean = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i) mean += m.values[i] * m.probabilities[i];
  return -mean / 2.0;
}

double dict_efficiency(const Game& game) {
  const UrgencyMixture m = urgency_mixture(game);
  double e_min = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    for (std::size_t j = 0; j < m.values.size(); ++j) {
      e_min += m.probabilities[i] * m.probabilities[j] * std::min(m.values[i], m.values[j]);
    }
  }
  return -e_min / 2.0;
}

std::vector<TypeWelfare> ex_ante_metrics(const Game& game, const SocialState& state) {
  const InteractionKernel kernel(game, state);
  std::vector<TypeWelfare> out(game.num_types());
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const double share = state.type_mass(tau);
    for (int u = 0; u < game.num_urgency(tau); ++u) {
      for (int k = 0; k < game.karma_levels(); ++k) {
        const double d = state.d(tau, u, k);
        if (d == 0.0) continue;
        const std::span<const double> pi = state.policy(tau, u, k);
        double selected = 0.0;
        for (int b = 0; b <= k; ++b) selected += pi[b] * kernel.p_selected(b);
        out[tau].access += d / share * selected;
        out[tau].reward += d / share * kernel.policy_reward(tau, u, k);
      }
    }
  }
  return out;
}

std::vector<TypeWelfare> dict_ex_ante_metrics(const Game& game) {
  const UrgencyMixture m = urgency_mixture(game);
  std::vector<TypeWelfare> out(game.num_types());
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const UrgencyChain& chain = game.type(tau).urgency;
    const std::vector<double> mu = chain.stationary_distribution();
    for (int u = 0; u < chain.num_states(); ++u) {
      const double value = chain.value(u);
      double below = 0.0;
      double equal = 0.0;
      for (std::size_t j = 0; j < m.values.size(); ++j) {
        if (m.values[j] < value) below += m.probabilities[j];
        if (m.values[j] == value) equal += m.probabilities[j];
      }
      const double access = below + 0.5 * equal;
      out[tau].access += mu[u] * access;
      out[tau].reward -= mu[u] * value * (1.0 - access);
    }
  }
  return out;
}

double empirical_efficiency(const SimTrace& trace) {
  require_interactions(trace);
  double total = 0.0;
  for (double r : trace.reward_sum) total += r;
  return total / (static_cast<double>(trace.agent_type.size()) * trace.rounds);
}

double access_fairness(const SimTrace& trace) {
  require_interactions(trace);
  std::vector<double> w(trace.wins.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = static_cast<double>(trace.wins[i]) / static_cast<double>(trace.interactions[i]);
  }
  return -population_std(w);
}

double reward_fairness(const SimTrace& trace) {
  require_interactions(trace);
  std::vector<double> z(trace.reward_sum.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = trace.reward_sum[i] / static_cast<double>(trace.interactions[i]);
  }
  return -population_std(z);
}

std::vector<TypeWelfare> empirical_type_metrics(const SimTrace& trace, int num_types) {
  require_interactions(trace);
  std::vector<TypeWelfare> out(num_types);
  std::vector<int> count(num_types, 0);
  for (std::size_t i = 0; i < trace.agent_type.size(); ++i) {
    const int tau = trace.agent_type[i];
    const double n = static_cast<double>(trace.interactions[i]);
    out[tau].access += static_cast<double>(trace.wins[i]) / n;
    out[tau].reward += trace.reward_sum[i] / n;
    ++count[tau];
  }
  for (int tau = 0; tau < num_types; ++tau) {
    if (count[tau] == 0) continue;
    out[tau].access /= count[tau];
    out[tau].reward /= count[tau];
  }
  return out;
}

WelfareReport aggregate_runs(std::span<const SimTrace> traces, int num_types) {
  WelfareReport report;
  report.n_repeats = static_cast<int>(traces.size());
  if (traces.empty()) return report;
  report.scheme = std::string(to_string(traces.front().scheme));
  std::vector<double> eff, af, rf;
  std::vector<std::vector<double>> access(num_types), reward(num_types);
  for (const SimTrace& t : traces) {
    eff.push_back(empirical_efficiency(t));
    af.push_back(access_fairness(t));
    rf.push_back(reward_fairness(t));
    const std::vector<TypeWelfare> per_type = empirical_type_metrics(t, num_types);
    for (int tau = 0; tau < num_types; ++tau) {
      access[tau].push_back(per_type[tau].access);
      reward[tau].push_back(per_type[tau].reward);
    }
  }
  report.efficiency = summarize(eff);
  report.access_fairness = summarize(af);
  report.reward_fairness = summarize(rf);
  for (int tau = 0; tau < num_types; ++tau) {
    report.per_type.push_back({summarize(access[tau]), summarize(reward[tau])});
  }
  return report;
}

}  // namespace karma
