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

#ifndef KARMA_TESTS_FIXTURES_H_
#define KARMA_TESTS_FIXTURES_H_

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "karma/game_model.h"

namespace fixtures {

inline karma::UrgencyChain two_state_chain() {
  return karma::UrgencyChain({1.0, 4.0}, {{0.7, 0.3}, {0.4, 0.6}});
}

// n_u = 2, k_max = 3.
inline karma::Game small_game(karma::PaymentRule rule, double discount = 0.9,
                              std::optional<karma::KarmaTax> tax = std::nullopt) {
  return karma::Game({{two_state_chain(), discount, 1.0}},
                     karma::MechanismConfig(rule, 1, 3, tax));
}

inline karma::Game single_chain_game(karma::UrgencyChain chain, karma::PaymentRule rule,
                                     int k_bar, int k_max = 0, double discount = 0.9) {
  return karma::Game({{std::move(chain), discount, 1.0}},
                     karma::MechanismConfig(rule, k_bar, k_max));
}

// Every agent of every urgency state bids its whole karma.
inline void bid_all(karma::SocialState& s) {
  for (int tau = 0; tau < s.num_types(); ++tau) {
    for (int u = 0; u < s.num_urgency(tau); ++u) {
      for (int k = 0; k < s.karma_levels(); ++k) {
        std::span<double> row = s.policy(tau, u, k);
        std::fill(row.begin(), row.end(), 0.0);
        row[k] = 1.0;
      }
    }
  }
}

// Deterministic bid `b` wherever feasible, bid-all below.
inline void bid_fixed(karma::SocialState& s, int b) {
  for (int tau = 0; tau < s.num_types(); ++tau) {
    for (int u = 0; u < s.num_urgency(tau); ++u) {
      for (int k = 0; k < s.karma_levels(); ++k) {
        std::span<double> row = s.policy(tau, u, k);
        std::fill(row.begin(), row.end(), 0.0);
        row[std::min(k, b)] = 1.0;
      }
    }
  }
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fixtures

#endif  // KARMA_TESTS_FIXTURES_H_
