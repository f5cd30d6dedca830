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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fixtures.h"
#include "karma/game_model.h"
#include "karma/interaction_kernel.h"
#include "karma/scenario.h"
#include "oracles.h"

using namespace karma;
using doctest::Approx;

namespace {

constexpr PaymentRule kPBP = PaymentRule::kPayBidToPeer;
constexpr PaymentRule kPBS = PaymentRule::kPayBidToSociety;

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

bool stochastic(std::span<const double> v, double tol) {
  for (double x : v) {
    if (x < 0.0) return false;
  }
  return std::abs(sum(v) - 1.0) <= tol;
}

// Opponents bid deterministically: mass[i] at karma karma[i], bidding bids[i].
SocialState bidding_state(const Game& game, const std::vector<int>& karma,
                          const std::vector<int>& bids, const std::vector<double>& mass) {
  SocialState s(game);
  for (std::size_t i = 0; i < karma.size(); ++i) {
    s.d(0, 0, karma[i]) += mass[i];
    std::span<double> row = s.policy(0, 0, karma[i]);
    std::fill(row.begin(), row.end(), 0.0);
    row[bids[i]] = 1.0;
  }
  return s;
}

Game one_state_game(PaymentRule rule, int k_bar, int k_max = 0) {
  return fixtures::single_chain_game(UrgencyChain({1.0}, {{1.0}}), rule, k_bar, k_max);
}

}  // namespace

TEST_CASE("urgency chain stationary distribution of the case study") {
  const Game game = preset_scenario("case_study_5_2").game;
  const std::vector<double> mu = game.type(0).urgency.stationary_distribution();
  CHECK(mu[0] == Approx(19.0 / 22.0).epsilon(1e-12));
  CHECK(mu[1] == Approx(2.0 / 22.0).epsilon(1e-12));
  CHECK(mu[2] == Approx(1.0 / 22.0).epsilon(1e-12));
  const std::vector<double> ref = oracle::stationary(game.type(0).urgency.transition_matrix());
  CHECK(fixtures::max_abs_diff(mu, ref) < 1e-12);
}

TEST_CASE("urgency chain rejects malformed input") {
  CHECK_THROWS_AS(UrgencyChain({1.0, 2.0}, {{0.5, 0.4}, {0.5, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(UrgencyChain({1.0}, {{1.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(UrgencyChain({-1.0}, {{1.0}}), std::invalid_argument);
}

TEST_CASE("bid distribution") {
  const Game game = one_state_game(kPBP, 2);
  SUBCASE("all mass at zero karma") {
    SocialState s = bidding_state(game, {0}, {0}, {1.0});
    const BidDistribution nu = bid_distribution(s);
    CHECK(nu[0] == 1.0);
    CHECK(sum(nu.probabilities()) == Approx(1.0));
  }
  SUBCASE("two deterministic bids") {
    SocialState s = bidding_state(game, {1, 3}, {1, 3}, {0.5, 0.5});
    const BidDistribution nu = bid_distribution(s);
    CHECK(nu[1] == Approx(0.5));
    CHECK(nu[3] == Approx(0.5));
    CHECK(nu[0] == 0.0);
  }
  SUBCASE("case study state against direct summation") {
    const Game cs = preset_scenario("case_study_5_2").game;
    std::mt19937_64 rng(7);
    const SocialState s = oracle::random_state(cs, rng, 40);
    const oracle::Enumerator e(cs, s);
    CHECK(fixtures::max_abs_diff(bid_distribution(s).probabilities(), e.opponent_bids()) < 1e-12);
  }
}

TEST_CASE("win probability") {
  const BidDistribution zero = BidDistribution::point_mass(4, 0);
  CHECK(win_probability(0, zero).p_selected == 0.5);
  CHECK(win_probability(1, zero).p_selected == 1.0);
  CHECK(win_probability(1, zero).p_yield == 0.0);
  const BidDistribution uniform({1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0});
  CHECK(win_probability(1, uniform).p_selected == Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(win_probability(4, uniform), std::domain_error);
  CHECK_THROWS_AS(win_probability(-1, uniform), std::domain_error);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(8);
    for (double& x : p) x = unit(rng);
    const double total = sum(p);
    for (double& x : p) x /= total;
    const BidDistribution nu(p);
    for (int b = 1; b < 8; ++b) {
      const OutcomeKernel lo = win_probability(b - 1, nu);
      const OutcomeKernel hi = win_probability(b, nu);
      CHECK(hi.p_selected >= lo.p_selected);
      CHECK(hi.p_selected + hi.p_yield == 1.0);
    }
  }
}

TEST_CASE("immediate reward") {
  const BidDistribution zero = BidDistribution::point_mass(4, 0);
  CHECK(immediate_reward(10.0, 1, zero) == 0.0);
  CHECK(immediate_reward(10.0, 0, zero) == -5.0);
  const BidDistribution uniform({1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0});
  CHECK(immediate_reward(1.0, 1, uniform) == Approx(-0.5).epsilon(1e-15));
  for (int b = 0; b < 4; ++b) {
    const double z = immediate_reward(10.0, b, uniform);
    CHECK(z <= 0.0);
    CHECK(z >= -10.0);
  }
}

TEST_CASE("mean surplus under PBS") {
  const Game game = one_state_game(kPBS, 2);
  SUBCASE("zero bids") {
    const SocialState s = bidding_state(game, {2}, {0}, {1.0});
    CHECK(mean_surplus_pbs(s) == 0.0);
  }
  SUBCASE("everyone bids two") {
    const SocialState s = bidding_state(game, {2}, {2}, {1.0});
    CHECK(mean_surplus_pbs(s) == Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("random state against sampled matches") {
    const Game g = one_state_game(kPBS, 3, 12);
    std::mt19937_64 rng(11);
    const SocialState s = oracle::random_state(g, rng, 12);
    const double exact = mean_surplus_pbs(s);
    CHECK(exact == Approx(oracle::Enumerator(g, s).mean_surplus()).epsilon(1e-12));

    // Sample agents from d, bids from pi, and average the winner's payment
    // per participating agent.
    std::vector<double> state_weights(s.distribution(0).begin(), s.distribution(0).end());
    std::discrete_distribution<int> pick(state_weights.begin(), state_weights.end());
    std::vector<std::discrete_distribution<int>> bid_of;
    for (int k = 0; k < g.karma_levels(); ++k) {
      std::span<const double> row = s.policy(0, 0, k);
      bid_of.emplace_back(row.begin(), row.end());
    }
    std::bernoulli_distribution coin(0.5);
    const int matches = 1000000;
    double total = 0.0;
    double total_sq = 0.0;
    for (int m = 0; m < matches; ++m) {
      const int b1 = bid_of[pick(rng)](rng);
      const int b2 = bid_of[pick(rng)](rng);
      const int pay = b1 > b2 ? b1 : (b2 > b1 ? b2 : (coin(rng) ? b1 : b2));
      const double per_agent = pay / 2.0;
      total += per_agent;
      total_sq += per_agent * per_agent;
    }
    const double mean = total / matches;
    const double sd = std::sqrt(total_sq / matches - mean * mean);
    CHECK(std::abs(mean - exact) <= 3.0 * sd / std::sqrt(static_cast<double>(matches)));
  }
}

TEST_CASE("karma transition examples") {
  SUBCASE("PBP selected pays own bid") {
    const Game g = one_state_game(kPBP, 2);
    const SocialState s = bidding_state(g, {2}, {2}, {1.0});
    const KarmaDistribution kd = karma_transition(g, 5, 2, Outcome::kSelected, s);
    CHECK(kd.probabilities[3] == 1.0);
  }
  SUBCASE("PBP yield receives the opposing bid") {
    const Game g = one_state_game(kPBP, 3);
    const SocialState s = bidding_state(g, {3}, {3}, {1.0});
    const KarmaDistribution kd = karma_transition(g, 5, 2, Outcome::kYield, s);
    CHECK(kd.probabilities[8] == 1.0);
  }
  SUBCASE("PBS floor and ceil redistribution") {
    // Opponents bid 1 or 3 with equal mass, so the mean surplus is 1.25.
    const Game g = one_state_game(kPBS, 5);
    const SocialState s = bidding_state(g, {4, 6}, {1, 3}, {0.5, 0.5});
    CHECK(mean_surplus_pbs(s) == Approx(1.25).epsilon(1e-15));
    const KarmaDistribution kd = karma_transition(g, 5, 2, Outcome::kSelected, s);
    CHECK(kd.probabilities[4] == Approx(0.75).epsilon(1e-15));
    CHECK(kd.probabilities[5] == Approx(0.25).epsilon(1e-15));
    CHECK(sum(kd.probabilities) == Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("PBP yield Bayes weights over opposing bids") {
    // Opponents bid 0, 2 or 4 with equal mass; own bid 2 yields to the tie
    // half of the time and always to 4: weights {2: 1/6, 4: 1/3} / 0.5.
    const Game g = one_state_game(kPBP, 2);
    const SocialState s = bidding_state(g, {0, 2, 4}, {0, 2, 4}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const KarmaDistribution kd = karma_transition(g, 5, 2, Outcome::kYield, s);
    CHECK(kd.probabilities[5] == 0.0);
    CHECK(kd.probabilities[7] == Approx(1.0 / 3).epsilon(1e-14));
    CHECK(kd.probabilities[9] == Approx(2.0 / 3).epsilon(1e-14));
    CHECK_FALSE(kd.null_conditioning);
  }
  SUBCASE("bid above karma") {
    const Game g = one_state_game(kPBP, 2);
    const SocialState s = bidding_state(g, {2}, {2}, {1.0});
    CHECK_THROWS_AS(karma_transition(g, 1, 2, Outcome::kSelected, s), std::domain_error);
  }
  SUBCASE("impossible outcome is flagged") {
    const Game g = one_state_game(kPBP, 2);
    const SocialState s = bidding_state(g, {2}, {0}, {1.0});
    const KarmaDistribution kd = karma_transition(g, 4, 1, Outcome::kYield, s);
    CHECK(kd.null_conditioning);
    CHECK(kd.probabilities[4] == 1.0);
  }
}

TEST_CASE("PBS redistribution preserves the mean surplus") {
  std::mt19937_64 rng(5);
  const Game g = one_state_game(kPBS, 3, 60);
  for (int trial = 0; trial < 50; ++trial) {
    const SocialState s = oracle::random_state(g, rng, 9);
    const double pbar = mean_surplus_pbs(s);
    const KarmaDistribution kd = karma_transition(g, 10, 0, Outcome::kYield, s);
    double mean = 0.0;
    for (int k = 0; k < g.karma_levels(); ++k) mean += k * kd.probabilities[k];
    CHECK(std::abs(mean - 10.0 - pbar) <= 1e-12);
  }
}

TEST_CASE("state transition") {
  SUBCASE("urgency and karma factorize") {
    const Game g = fixtures::single_chain_game(fixtures::two_state_chain(), kPBP, 2);
    std::mt19937_64 rng(1);
    const SocialState s = oracle::random_state(g, rng, 6);
    const int L = g.karma_levels();
    const std::vector<double> rho = state_transition(g, 0, 1, 4, 2, s);
    const OutcomeKernel gamma = win_probability(2, bid_distribution(s));
    const KarmaDistribution sel = karma_transition(g, 4, 2, Outcome::kSelected, s);
    const KarmaDistribution yld = karma_transition(g, 4, 2, Outcome::kYield, s);
    for (int up = 0; up < 2; ++up) {
      for (int k = 0; k < L; ++k) {
        const double mix =
            gamma.p_selected * sel.probabilities[k] + gamma.p_yield * yld.probabilities[k];
        CHECK(rho[up * L + k] ==
              Approx(g.type(0).urgency.transition(1, up) * mix).epsilon(1e-14));
      }
    }
  }
  SUBCASE("case study intermediate state escalates half of the time") {
    const Game g = preset_scenario("case_study_5_2").game;
    const SocialState s = SocialState::default_initial(g);
    const int L = g.karma_levels();
    for (int k : {0, 3, 10, 40}) {
      const std::vector<double> rho = state_transition(g, 0, 1, k, k / 2, s);
      double high = 0.0;
      for (int kp = 0; kp < L; ++kp) high += rho[2 * L + kp];
      CHECK(high == Approx(0.5).epsilon(1e-14));
      CHECK(stochastic(rho, 1e-9));
    }
  }
}

TEST_CASE("policy reward") {
  const Game g = fixtures::single_chain_game(UrgencyChain({0.0, 5.0}, {{0.5, 0.5}, {0.5, 0.5}}),
                                             kPBP, 2);
  std::mt19937_64 rng(9);
  SocialState s = oracle::random_state(g, rng, 6);
  CHECK(policy_reward(g, 0, 0, 3, s) == 0.0);
  fixtures::bid_fixed(s, 2);
  const BidDistribution nu2 = bid_distribution(s);
  CHECK(policy_reward(g, 0, 1, 4, s) == Approx(immediate_reward(5.0, 2, nu2)).epsilon(1e-15));
  std::span<double> row = s.policy(0, 1, 4);
  std::fill(row.begin(), row.end(), 0.0);
  row[0] = row[1] = 0.5;
  const BidDistribution nu3 = bid_distribution(s);
  CHECK(policy_reward(g, 0, 1, 4, s) ==
        Approx(0.5 * immediate_reward(5.0, 0, nu3) + 0.5 * immediate_reward(5.0, 1, nu3))
            .epsilon(1e-14));
}

TEST_CASE("policy transition") {
  const Game g = fixtures::small_game(kPBS);
  std::mt19937_64 rng(2);
  SocialState s = oracle::random_state(g, rng, 3);
  fixtures::bid_fixed(s, 1);
  const int L = g.karma_levels();
  const int n = 2 * L;
  const std::vector<double> p = policy_transition(g, 0, s);
  for (int u = 0; u < 2; ++u) {
    for (int k = 0; k < L; ++k) {
      const std::vector<double> rho = state_transition(g, 0, u, k, std::min(k, 1), s);
      std::span<const double> row(p.data() + (u * L + k) * n, n);
      CHECK(fixtures::max_abs_diff(row, rho) <= 1e-15);
      CHECK(stochastic(row, 1e-9));
    }
  }
}

TEST_CASE("small instances match exhaustive enumeration") {
  const std::vector<std::optional<KarmaTax>> taxes = {std::nullopt, KarmaTax{0.3, 1.5}};
  std::mt19937_64 rng(13);
  for (PaymentRule rule : {kPBP, kPBS}) {
    for (const auto& tax : taxes) {
      const Game g = fixtures::small_game(rule, 0.9, tax);
      for (int trial = 0; trial < 20; ++trial) {
        const SocialState s = oracle::random_state(g, rng, 3);
        const oracle::Enumerator e(g, s);
        const std::vector<double> p = policy_transition(g, 0, s);
        const oracle::Dense ref = e.policy_matrix(0);
        const int n = static_cast<int>(ref.size());
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
          worst = std::max(worst, fixtures::max_abs_diff({p.data() + i * n, static_cast<std::size_t>(n)}, ref[i]));
        }
        CHECK(worst <= 1e-12);
        for (int u = 0; u < 2; ++u) {
          for (int k = 0; k < g.karma_levels(); ++k) {
            for (int b = 0; b <= k; ++b) {
              CHECK(fixtures::max_abs_diff(state_transition(g, 0, u, k, b, s),
                                           e.state_row(0, u, k, b)) <= 1e-12);
              CHECK(policy_reward(g, 0, u, k, s) ==
                    Approx(e.policy_rewards(0)[u * g.karma_levels() + k]).epsilon(1e-12));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("kernels are stochastic on fuzzed inputs") {
  std::mt19937_64 rng(17);
  const Game cs = preset_scenario("case_study_5_2").game;
  const Game taxed = with_tax_coefficient(with_payment_rule(cs, kPBP), 0.005);
  for (const Game* g : {&cs, &taxed}) {
    for (int trial = 0; trial < 10; ++trial) {
      const SocialState s = oracle::random_state(*g, rng, 30);
      const InteractionKernel kernel(*g, s);
      for (int k = 0; k < g->karma_levels(); k += 7) {
        for (int b = 0; b <= k; b += 3) {
          for (Outcome o : {Outcome::kSelected, Outcome::kYield}) {
            CHECK(stochastic(kernel.karma_transition(k, b, o).probabilities, 1e-9));
          }
          CHECK(stochastic(kernel.state_transition(0, 1, k, b), 1e-9));
        }
        CHECK(stochastic(kernel.policy_karma_marginal(0, 2, k), 1e-9));
      }
    }
  }
}

TEST_CASE("karma preservation") {
  SUBCASE("zero bids move no karma") {
    const Game g = preset_scenario("case_study_5_2").game;
    SocialState s = SocialState::default_initial(g);
    fixtures::bid_fixed(s, 0);
    CHECK(karma_preservation_residual(g, s) <= 1e-12);
  }
  SUBCASE("fuzzed states without truncation") {
    // k_max = 20 k_bar, mass on k <= 2 k_bar: payments never reach k_max.
    std::mt19937_64 rng(23);
    for (PaymentRule rule : {kPBP, kPBS}) {
      const Game g = fixtures::single_chain_game(
          UrgencyChain({1.0, 1.0, 10.0}, {{0.95, 0.05, 0.0}, {0.0, 0.5, 0.5}, {0.95, 0.05, 0.0}}),
          rule, 3, 60);
      double worst = 0.0;
      for (int trial = 0; trial < 1000; ++trial) {
        const SocialState s = oracle::random_state(g, rng, 6);
        worst = std::max(worst, karma_preservation_residual(g, s));
      }
      INFO("rule " << to_string(rule) << " worst residual " << worst);
      CHECK(worst <= 1e-6 * 3);
    }
  }
  SUBCASE("mass at k_max under PBP reports the clamped expectation") {
    const Game g = one_state_game(kPBP, 2, 8);
    const SocialState s = bidding_state(g, {8, 6}, {0, 4}, {0.5, 0.5});
    const double residual = karma_preservation_residual(g, s);
    CHECK(residual > 0.0);
    CHECK(residual == Approx(oracle::clamped_loss(g, s)).epsilon(1e-12));
  }
}

TEST_CASE("kernel rows are Lipschitz in the social state") {
  const Game g = fixtures::small_game(kPBS);
  std::mt19937_64 rng(29);
  const SocialState base = oracle::random_state(g, rng, 3);
  const SocialState other = oracle::random_state(g, rng, 3);
  double worst_ratio = 0.0;
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
    SocialState mixed = base;
    for (int u = 0; u < 2; ++u) {
      for (int k = 0; k < g.karma_levels(); ++k) {
        mixed.d(0, u, k) = (1 - eps) * base.d(0, u, k) + eps * other.d(0, u, k);
        for (int b = 0; b <= k; ++b) {
          mixed.policy(0, u, k)[b] =
              (1 - eps) * base.policy(0, u, k)[b] + eps * other.policy(0, u, k)[b];
        }
      }
    }
    const double diff = fixtures::max_abs_diff(policy_transition(g, 0, base),
                                               policy_transition(g, 0, mixed));
    worst_ratio = std::max(worst_ratio, diff / eps);
  }
  CHECK(worst_ratio < 50.0);
}

TEST_CASE("social state validation") {
  const Game g = fixtures::small_game(kPBP);
  SocialState s = SocialState::default_initial(g);
  CHECK(s.violations(g, 1e-9).empty());
  s.policy(0, 1, 2)[0] = 0.8;
  CHECK_FALSE(s.violations(g, 1e-9).empty());
  CHECK_THROWS_AS(s.validate(g, 1e-9), std::invalid_argument);
}
