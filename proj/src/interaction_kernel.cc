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

#include "karma/interaction_kernel.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace karma {
namespace {

struct FloorCeilSplit {
  int low = 0;
  int high = 0;
  double f_low = 1.0;  // probability of receiving `low`
};

// Integer split of a non-negative real x into floor/ceil with
// f_low * floor + (1 - f_low) * ceil == x.
FloorCeilSplit split(double x) {
  FloorCeilSplit out;
  out.low = static_cast<int>(std::floor(x));
  out.high = static_cast<int>(std::ceil(x));
  out.f_low = out.high == out.low ? 1.0 : static_cast<double>(out.high) - x;
  return out;
}

}  // namespace

InteractionKernel::InteractionKernel(const Game& game, const SocialState& state)
    : game_(&game),
      state_(&state),
      levels_(game.karma_levels()),
      k_max_(game.k_max()),
      rule_(game.mechanism().payment_rule()),
      bids_(bid_distribution(state)) {
  if (state.karma_levels() != levels_ || state.num_types() != game.num_types()) {
    throw std::invalid_argument("interaction kernel: social state does not match game");
  }
  p_selected_.resize(levels_);
  below_.resize(levels_);
  double below = 0.0;
  for (int b = 0; b < levels_; ++b) {
    below_[b] = below;
    p_selected_[b] = std::min(1.0, below + 0.5 * bids_[b]);
    below += bids_[b];
  }

  if (rule_ == PaymentRule::kPayBidToSociety) {
    for (int b = 1; b < levels_; ++b) mean_surplus_ += bids_[b] * p_selected_[b] * b;
    const FloorCeilSplit s = split(mean_surplus_);
    surplus_low_ = s.low;
    surplus_high_ = s.high;
    surplus_f_low_ = s.f_low;
  }

  const MechanismConfig& mech = game.mechanism();
  taxed_ = mech.tax().has_value();
  if (taxed_) {
    tax_low_.resize(levels_);
    tax_p_high_.resize(levels_);
    for (int k = 0; k < levels_; ++k) {
      const double h = mech.tax_amount(k);
      tax_low_[k] = static_cast<int>(std::floor(h));
      tax_p_high_[k] = h - tax_low_[k];
    }
  }

  // Pre-tax marginals for every row; the tax rebate depends on the population
  // distribution of pre-tax karma, so the tax step is applied afterwards.
  const std::size_t L = levels_;
  std::vector<double> population_pretax(L, 0.0);
  marginals_.resize(game.num_types());
  supports_.resize(game.num_types());
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const int n_u = game.num_urgency(tau);
    marginals_[tau].assign(n_u * L * L, 0.0);
    supports_[tau].assign(n_u * L, {0, 0});
    for (int u = 0; u < n_u; ++u) {
      for (int k = 0; k < levels_; ++k) {
        std::span<double> row(marginals_[tau].data() + (u * L + k) * L, L);
        pretax_marginal(state.policy(tau, u, k), k, row);
        const double mass = state.d(tau, u, k);
        if (taxed_ && mass != 0.0) {
          for (std::size_t k1 = 0; k1 < L; ++k1) population_pretax[k1] += mass * row[k1];
        }
      }
    }
  }

  if (taxed_) {
    for (int k1 = 0; k1 < levels_; ++k1) {
      mean_tax_ += population_pretax[k1] * mech.tax_amount(k1);
    }
    const FloorCeilSplit r = split(mean_tax_);
    rebate_low_ = r.low;
    rebate_high_ = r.high;
    rebate_f_low_ = r.f_low;
  }

  std::vector<double> scratch(L);
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const int n_u = game.num_urgency(tau);
    for (int u = 0; u < n_u; ++u) {
      for (int k = 0; k < levels_; ++k) {
        std::span<double> row(marginals_[tau].data() + (u * L + k) * L, L);
        if (taxed_) {
          std::copy(row.begin(), row.end(), scratch.begin());
          apply_tax(scratch, row);
        }
        int first = 0;
        while (first < levels_ - 1 && row[first] == 0.0) ++first;
        int last = levels_ - 1;
        while (last > first && row[last] == 0.0) --last;
        supports_[tau][u * L + k] = {first, last};
      }
    }
  }
}

OutcomeKernel InteractionKernel::outcome(int bid) const {
  if (bid < 0 || bid > k_max_) {
    throw std::domain_error("bid " + std::to_string(bid) + " outside 0.." +
                            std::to_string(k_max_));
  }
  return {p_selected_[bid], 1.0 - p_selected_[bid]};
}

bool InteractionKernel::has_null_outcomes() const {
  return std::any_of(p_selected_.begin(), p_selected_.end(),
                     [](double p) { return p == 0.0 || p == 1.0; });
}

void InteractionKernel::pretax_marginal(std::span<const double> policy, int k,
                                        std::span<double> out) const {
  const int k_plus_one = static_cast<int>(policy.size());
  if (rule_ == PaymentRule::kPayBidToPeer) {
    for (int b = 0; b < k_plus_one; ++b) {
      if (policy[b] != 0.0) out[k - b] += policy[b] * p_selected_[b];
    }
    // Yield against opposing bid b': weight nu[b'] * sum_b pi[b] P[o=1 | b, b'].
    double policy_below = 0.0;
    for (int bp = 0; bp < levels_; ++bp) {
      const double own = bp < k_plus_one ? policy[bp] : 0.0;
      const double weight = policy_below + 0.5 * own;
      if (bids_[bp] != 0.0 && weight != 0.0) out[clamp(k + bp)] += bids_[bp] * weight;
      policy_below += own;
    }
    return;
  }
  const double f_low = surplus_f_low_;
  const double f_high = 1.0 - f_low;
  double yield = 0.0;
  for (int b = 0; b < k_plus_one; ++b) {
    if (policy[b] == 0.0) continue;
    const double selected = policy[b] * p_selected_[b];
    yield += policy[b] * (1.0 - p_selected_[b]);
    if (selected == 0.0) continue;
    out[clamp(k - b + surplus_low_)] += selected * f_low;
    if (f_high != 0.0) out[clamp(k - b + surplus_high_)] += selected * f_high;
  }
  if (yield != 0.0) {
    out[clamp(k + surplus_low_)] += yield * f_low;
    if (f_high != 0.0) out[clamp(k + surplus_high_)] += yield * f_high;
  }
}

void InteractionKernel::apply_tax(std::span<const double> pre,
                                  std::span<double> post) const {
  std::fill(post.begin(), post.end(), 0.0);
  const double r_low = rebate_f_low_;
  const double r_high = 1.0 - r_low;
  for (int k1 = 0; k1 < levels_; ++k1) {
    const double mass = pre[k1];
    if (mass == 0.0) continue;
    const double p_high = tax_p_high_[k1];
    const int after_low = k1 - tax_low_[k1];
    post[clamp(after_low + rebate_low_)] += mass * (1.0 - p_high) * r_low;
    if (r_high != 0.0) post[clamp(after_low + rebate_high_)] += mass * (1.0 - p_high) * r_high;
    if (p_high != 0.0) {
      post[clamp(after_low - 1 + rebate_low_)] += mass * p_high * r_low;
      if (r_high != 0.0) post[clamp(after_low - 1 + rebate_high_)] += mass * p_high * r_high;
    }
  }
}

std::vector<double> InteractionKernel::expected_after_tax(std::span<const double> w) const {
  std::vector<double> out(w.begin(), w.end());
  if (!taxed_) return out;
  const double r_low = rebate_f_low_;
  const double r_high = 1.0 - r_low;
  for (int k1 = 0; k1 < levels_; ++k1) {
    const double p_high = tax_p_high_[k1];
    const int after_low = k1 - tax_low_[k1];
    double v = (1.0 - p_high) * (r_low * w[clamp(after_low + rebate_low_)] +
                                 r_high * w[clamp(after_low + rebate_high_)]);
    if (p_high != 0.0) {
      v += p_high * (r_low * w[clamp(after_low - 1 + rebate_low_)] +
                     r_high * w[clamp(after_low - 1 + rebate_high_)]);
    }
    out[k1] = v;
  }
  return out;
}

void InteractionKernel::continuation(int k, std::span<const double> w_tax,
                                     std::span<double> out) const {
  if (rule_ == PaymentRule::kPayBidToPeer) {
    double above = 0.0;  // sum_{b' > b} nu[b'] w[k + b']
    for (int bp = levels_ - 1; bp > k; --bp) above += bids_[bp] * w_tax[clamp(k + bp)];
    for (int b = k; b >= 0; --b) {
      const double tie = bids_[b] * w_tax[clamp(k + b)];
      out[b] = p_selected_[b] * w_tax[k - b] + above + 0.5 * tie;
      above += tie;
    }
    return;
  }
  const double f_low = surplus_f_low_;
  const double f_high = 1.0 - f_low;
  const double after_yield =
      f_low * w_tax[clamp(k + surplus_low_)] + f_high * w_tax[clamp(k + surplus_high_)];
  for (int b = 0; b <= k; ++b) {
    const double after_selected = f_low * w_tax[clamp(k - b + surplus_low_)] +
                                  f_high * w_tax[clamp(k - b + surplus_high_)];
    out[b] = p_selected_[b] * after_selected + (1.0 - p_selected_[b]) * after_yield;
  }
}

std::vector<double> InteractionKernel::payment_distribution(int k, int bid,
                                                            Outcome outcome,
                                                            bool* null_conditioning,
                                                            double* clamped) const {
  std::vector<double> out(levels_, 0.0);
  auto add = [&](int karma, double p) {
    if (karma > k_max_) *clamped += p;
    out[clamp(karma)] += p;
  };
  if (rule_ == PaymentRule::kPayBidToPeer) {
    if (outcome == Outcome::kSelected) {
      add(k - bid, 1.0);
      return out;
    }
    // Bayes weights nu[b'] P[o=1 | b, b'] / gamma[o=1 | b].
    double total = 0.0;
    for (int bp = bid; bp < levels_; ++bp) {
      total += bids_[bp] * (bp == bid ? 0.5 : 1.0);
    }
    if (total == 0.0) {
      *null_conditioning = true;
      out[k] = 1.0;
      return out;
    }
    for (int bp = bid; bp < levels_; ++bp) {
      const double w = bids_[bp] * (bp == bid ? 0.5 : 1.0);
      if (w != 0.0) add(k + bp, w / total);
    }
    return out;
  }
  const int base = outcome == Outcome::kSelected ? k - bid : k;
  add(base + surplus_low_, surplus_f_low_);
  if (surplus_f_low_ != 1.0) add(base + surplus_high_, 1.0 - surplus_f_low_);
  return out;
}

KarmaDistribution InteractionKernel::karma_transition(int k, int bid,
                                                      Outcome outcome) const {
  if (k < 0 || k > k_max_) {
    throw std::domain_error("karma " + std::to_string(k) + " outside 0.." +
                            std::to_string(k_max_));
  }
  if (bid < 0 || bid > k) {
    throw std::domain_error("bid " + std::to_string(bid) + " infeasible at karma " +
                            std::to_string(k));
  }
  KarmaDistribution result;
  std::vector<double> pre =
      payment_distribution(k, bid, outcome, &result.null_conditioning, &result.clamped_mass);
  if (!taxed_) {
    result.probabilities = std::move(pre);
    return result;
  }
  // Track mass pushed above k_max by the rebate as well.
  const double r_high = 1.0 - rebate_f_low_;
  for (int k1 = 0; k1 < levels_; ++k1) {
    if (pre[k1] == 0.0) continue;
    const double p_high = tax_p_high_[k1];
    const int after_low = k1 - tax_low_[k1];
    auto over = [&](int karma, double p) {
      if (karma > k_max_) result.clamped_mass += pre[k1] * p;
    };
    over(after_low + rebate_low_, (1.0 - p_high) * rebate_f_low_);
    over(after_low + rebate_high_, (1.0 - p_high) * r_high);
    over(after_low - 1 + rebate_low_, p_high * rebate_f_low_);
    over(after_low - 1 + rebate_high_, p_high * r_high);
  }
  result.probabilities.assign(levels_, 0.0);
  apply_tax(pre, result.probabilities);
  return result;
}

std::vector<double> InteractionKernel::state_transition(int tau, int u, int k,
                                                        int bid) const {
  const UrgencyChain& chain = game_->type(tau).urgency;
  const OutcomeKernel gamma = outcome(bid);
  std::vector<double> karma(levels_, 0.0);
  for (Outcome o : {Outcome::kSelected, Outcome::kYield}) {
    const double p = o == Outcome::kSelected ? gamma.p_selected : gamma.p_yield;
    if (p == 0.0) continue;
    const KarmaDistribution kappa = karma_transition(k, bid, o);
    for (int kp = 0; kp < levels_; ++kp) karma[kp] += p * kappa.probabilities[kp];
  }
  std::vector<double> out(static_cast<std::size_t>(chain.num_states()) * levels_, 0.0);
  for (int up = 0; up < chain.num_states(); ++up) {
    const double phi = chain.transition(u, up);
    if (phi == 0.0) continue;
    for (int kp = 0; kp < levels_; ++kp) out[up * levels_ + kp] = phi * karma[kp];
  }
  return out;
}

double InteractionKernel::policy_reward(int tau, int u, int k) const {
  const std::span<const double> row = state_->policy(tau, u, k);
  double yield = 0.0;
  for (int b = 0; b <= k; ++b) yield += row[b] * (1.0 - p_selected_[b]);
  return -game_->type(tau).urgency.value(u) * yield;
}

std::span<const double> InteractionKernel::policy_karma_marginal(int tau, int u,
                                                                 int k) const {
  const std::size_t L = levels_;
  return {marginals_[tau].data() + (u * L + k) * L, L};
}

std::pair<int, int> InteractionKernel::policy_karma_support(int tau, int u, int k) const {
  return supports_[tau][static_cast<std::size_t>(u) * levels_ + k];
}

std::vector<double> InteractionKernel::policy_transition(int tau) const {
  const UrgencyChain& chain = game_->type(tau).urgency;
  const std::size_t n_u = chain.num_states();
  const std::size_t L = levels_;
  const std::size_t n = n_u * L;
  std::vector<double> out(n * n, 0.0);
  for (std::size_t u = 0; u < n_u; ++u) {
    for (std::size_t k = 0; k < L; ++k) {
      const std::span<const double> m = policy_karma_marginal(tau, u, k);
      double* row = out.data() + (u * L + k) * n;
      for (std::size_t up = 0; up < n_u; ++up) {
        const double phi = chain.transition(u, up);
        if (phi == 0.0) continue;
        for (std::size_t kp = 0; kp < L; ++kp) row[up * L + kp] = phi * m[kp];
      }
    }
  }
  return out;
}

double InteractionKernel::karma_preservation_residual() const {
  double before = 0.0;
  double after = 0.0;
  for (int tau = 0; tau < game_->num_types(); ++tau) {
    for (int u = 0; u < game_->num_urgency(tau); ++u) {
      for (int k = 0; k < levels_; ++k) {
        const double mass = state_->d(tau, u, k);
        if (mass == 0.0) continue;
        before += mass * k;
        const std::span<const double> m = policy_karma_marginal(tau, u, k);
        double expected = 0.0;
        for (int kp = 0; kp < levels_; ++kp) expected += m[kp] * kp;
        after += mass * expected;
      }
    }
  }
  return std::abs(after - before);
}

}  // namespace karma
