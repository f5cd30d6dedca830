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

#ifndef KARMA_INTERACTION_KERNEL_H_
#define KARMA_INTERACTION_KERNEL_H_

#include <span>
#include <vector>

#include "karma/game_model.h"

namespace karma {

// Everything one resource competition induces for a fixed social state:
// opponent bid distribution, outcome probabilities, payment/redistribution
// and tax kernels, and the per-state karma marginals of the current policy.
//
// Built once per social state and immutable afterwards. Holds a reference to
// the game, which must outlive it.
class InteractionKernel {
 public:
  InteractionKernel(const Game& game, const SocialState& state);

  const Game& game() const { return *game_; }
  int karma_levels() const { return levels_; }
  const BidDistribution& bids() const { return bids_; }

  // Throws std::domain_error for bids outside 0..k_max.
  OutcomeKernel outcome(int bid) const;
  double p_selected(int bid) const { return p_selected_[bid]; }
  double p_yield(int bid) const { return 1.0 - p_selected_[bid]; }
  double reward(double urgency, int bid) const { return -urgency * p_yield(bid); }

  // Mean PBS surplus per agent (zero under PBP).
  double mean_surplus() const { return mean_surplus_; }
  // Mean tax revenue per agent (zero without tax).
  double mean_tax() const { return mean_tax_; }
  // Some bid has an outcome of probability zero.
  bool has_null_outcomes() const;

  // kappa[k+ | k, b, o], including tax and clamping at k_max. Throws
  // std::domain_error if bid > k or k is out of range.
  KarmaDistribution karma_transition(int k, int bid, Outcome outcome) const;

  // rho[u+, k+ | u, k, b] flattened as u+ * karma_levels + k+.
  std::vector<double> state_transition(int tau, int u, int k, int bid) const;

  double policy_reward(int tau, int u, int k) const;

  // Karma marginal sum_b pi[b|u,k] sum_o gamma[o|b] kappa[. | k, b, o].
  std::span<const double> policy_karma_marginal(int tau, int u, int k) const;
  // Non-zero range [first, last] of policy_karma_marginal.
  std::pair<int, int> policy_karma_support(int tau, int u, int k) const;

  // Dense P over flat (u, k) states, row-major.
  std::vector<double> policy_transition(int tau) const;

  double karma_preservation_residual() const;

  // For next-karma values w (length karma_levels), returns the expectation of
  // w over the tax-and-rebate step applied to each pre-tax karma level.
  std::vector<double> expected_after_tax(std::span<const double> w) const;

  // out[b] = sum_o gamma[o|b] sum_{k1} kappa_pay[k1 | k, b, o] * w_tax[k1]
  // for b in 0..k, where w_tax is the output of expected_after_tax. out must
  // have at least k + 1 entries.
  void continuation(int k, std::span<const double> w_tax,
                    std::span<double> out) const;

 private:
  int clamp(int karma) const { return karma > k_max_ ? k_max_ : karma; }
  // Pre-tax karma marginal of one policy row, accumulated into out.
  void pretax_marginal(std::span<const double> policy, int k,
                       std::span<double> out) const;
  void apply_tax(std::span<const double> pre, std::span<double> post) const;
  std::vector<double> payment_distribution(int k, int bid, Outcome outcome,
                                           bool* null_conditioning,
                                           double* clamped) const;

  const Game* game_;
  const SocialState* state_;
  int levels_;
  int k_max_;
  PaymentRule rule_;
  BidDistribution bids_;
  std::vector<double> p_selected_;
  std::vector<double> below_;  // sum_{b' < b} nu[b']
  double mean_surplus_ = 0.0;
  int surplus_low_ = 0;
  int surplus_high_ = 0;
  double surplus_f_low_ = 1.0;

  bool taxed_ = false;
  std::vector<int> tax_low_;       // floor(h[k])
  std::vector<double> tax_p_high_; // probability of deducting ceil(h[k])
  double mean_tax_ = 0.0;
  int rebate_low_ = 0;
  int rebate_high_ = 0;
  double rebate_f_low_ = 1.0;

  // Per type: flat [(u * L + k) * L + k+].
  std::vector<std::vector<double>> marginals_;
  std::vector<std::vector<std::pair<int, int>>> supports_;
};

}  // namespace karma

#endif  // KARMA_INTERACTION_KERNEL_H_
