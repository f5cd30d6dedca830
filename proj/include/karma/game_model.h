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

#ifndef KARMA_GAME_MODEL_H_
#define KARMA_GAME_MODEL_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace karma {

// Tolerance hierarchy: construction invariants are checked tightly, derived
// distributions a little looser.
inline constexpr double kConstructionTolerance = 1e-12;
inline constexpr double kDistributionTolerance = 1e-9;

// Exogenous, irreducible urgency process of one agent type. States are
// identified by index; two states may share the same urgency value.
class UrgencyChain {
 public:
  // Throws std::invalid_argument if the matrix is not row-stochastic, the
  // chain is reducible, or a value is negative or non-finite.
  UrgencyChain(std::vector<double> values,
               std::vector<std::vector<double>> transition);

  int num_states() const { return static_cast<int>(values_.size()); }
  double value(int u) const { return values_[u]; }
  const std::vector<double>& values() const { return values_; }
  double transition(int from, int to) const {
    return transition_[static_cast<std::size_t>(from) * values_.size() + to];
  }
  std::span<const double> row(int from) const {
    return {transition_.data() + static_cast<std::size_t>(from) * values_.size(),
            values_.size()};
  }
  std::vector<std::vector<double>> transition_matrix() const;
  double max_value() const;

  // Unique stationary distribution of the chain.
  std::vector<double> stationary_distribution() const;

  bool operator==(const UrgencyChain&) const = default;

 private:
  std::vector<double> values_;
  std::vector<double> transition_;  // row-major n_u x n_u
};

// A private static agent type: urgency process, discount factor and
// population share. discount == 1 selects the average-reward criterion.
struct AgentType {
  UrgencyChain urgency;
  double discount = 0.0;
  double share = 1.0;

  bool average_reward() const { return discount == 1.0; }
  bool operator==(const AgentType&) const = default;
};

enum class PaymentRule {
  kPayBidToPeer,     // PBP: the winner pays its bid to the loser.
  kPayBidToSociety,  // PBS: the winner pays into a surplus that is redistributed.
};

std::string_view to_string(PaymentRule rule);
// Accepts "PBP" or "PBS"; throws std::invalid_argument otherwise.
PaymentRule parse_payment_rule(std::string_view name);

// Progressive karma tax h[k] = min(k, coefficient * k^exponent).
struct KarmaTax {
  double coefficient = 0.0;
  double exponent = 1.0;

  double amount(int karma) const;
  bool operator==(const KarmaTax&) const = default;
};

class MechanismConfig {
 public:
  static constexpr int kDefaultTruncationFactor = 15;

  // k_max == 0 selects the default truncation kDefaultTruncationFactor * k_bar.
  // Throws std::invalid_argument on violated invariants.
  MechanismConfig(PaymentRule rule, int k_bar, int k_max = 0,
                  std::optional<KarmaTax> tax = std::nullopt);

  PaymentRule payment_rule() const { return rule_; }
  int k_bar() const { return k_bar_; }
  int k_max() const { return k_max_; }
  // Karma levels 0..k_max; bids range over the same set.
  int karma_levels() const { return k_max_ + 1; }
  int num_bids() const { return k_max_ + 1; }
  const std::optional<KarmaTax>& tax() const { return tax_; }
  double tax_amount(int karma) const { return tax_ ? tax_->amount(karma) : 0.0; }

  bool operator==(const MechanismConfig&) const = default;

 private:
  PaymentRule rule_;
  int k_bar_;
  int k_max_;
  std::optional<KarmaTax> tax_;
};

// The karma dynamic population game: agent types plus mechanism.
class Game {
 public:
  // Throws std::invalid_argument if shares do not sum to one or a type is
  // malformed.
  Game(std::vector<AgentType> types, MechanismConfig mechanism);

  int num_types() const { return static_cast<int>(types_.size()); }
  const AgentType& type(int tau) const { return types_[tau]; }
  const std::vector<AgentType>& types() const { return types_; }
  const MechanismConfig& mechanism() const { return mechanism_; }
  int karma_levels() const { return mechanism_.karma_levels(); }
  int k_max() const { return mechanism_.k_max(); }
  int num_urgency(int tau) const { return types_[tau].urgency.num_states(); }
  double max_urgency() const;

  bool operator==(const Game&) const = default;

 private:
  std::vector<AgentType> types_;
  MechanismConfig mechanism_;
};

// Joint type-state distribution d and per-type bidding policy pi. Policy rows
// are stored over all bids 0..k_max with zeros above the karma level.
class SocialState {
 public:
  // All-zero distribution and the bid-zero policy.
  explicit SocialState(const Game& game);

  // Stationary urgency times a point mass at k_bar, uniform policy over
  // feasible bids.
  static SocialState default_initial(const Game& game);

  int num_types() const { return static_cast<int>(d_.size()); }
  int karma_levels() const { return levels_; }
  int num_urgency(int tau) const { return n_u_[tau]; }

  double d(int tau, int u, int k) const { return d_[tau][index(u, k)]; }
  double& d(int tau, int u, int k) { return d_[tau][index(u, k)]; }
  std::span<const double> distribution(int tau) const { return d_[tau]; }
  std::span<double> distribution(int tau) { return d_[tau]; }

  // Policy row over bids 0..k.
  std::span<const double> policy(int tau, int u, int k) const {
    return {pi_[tau].data() + row_offset(u, k), static_cast<std::size_t>(k) + 1};
  }
  std::span<double> policy(int tau, int u, int k) {
    return {pi_[tau].data() + row_offset(u, k), static_cast<std::size_t>(k) + 1};
  }
  // Full-width storage for one type (rows of length karma_levels()).
  std::span<const double> policy_storage(int tau) const { return pi_[tau]; }
  std::span<double> policy_storage(int tau) { return pi_[tau]; }

  double type_mass(int tau) const;
  double mean_karma() const;
  double mean_karma(int tau) const;  // conditional on the type

  // Itemized invariant violations (empty when valid).
  std::vector<std::string> violations(const Game& game,
                                      double karma_drift_tolerance) const;
  // Throws std::invalid_argument listing every violation.
  void validate(const Game& game, double karma_drift_tolerance) const;

  bool operator==(const SocialState&) const = default;

 private:
  std::size_t index(int u, int k) const {
    return static_cast<std::size_t>(u) * levels_ + k;
  }
  std::size_t row_offset(int u, int k) const { return index(u, k) * levels_; }

  int levels_;
  std::vector<int> n_u_;
  std::vector<std::vector<double>> d_;
  std::vector<std::vector<double>> pi_;
};

// Distribution of an opponent's bid over 0..k_max.
class BidDistribution {
 public:
  // Throws std::invalid_argument unless entries are non-negative and sum to 1.
  explicit BidDistribution(std::vector<double> probabilities);
  static BidDistribution point_mass(int levels, int bid);

  int size() const { return static_cast<int>(probabilities_.size()); }
  double operator[](int b) const { return probabilities_[b]; }
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<double> probabilities_;
};

struct OutcomeKernel {
  double p_selected = 0.0;
  double p_yield = 1.0;
};

enum class Outcome { kSelected = 0, kYield = 1 };

struct KarmaDistribution {
  std::vector<double> probabilities;  // over k+ in 0..k_max
  // The conditioning outcome had probability zero; the identity kernel was
  // returned instead.
  bool null_conditioning = false;
  // Mass that fell above k_max before clamping.
  double clamped_mass = 0.0;
};

// nu[b'] = sum over (tau, u, k) of d * pi[b' | u, k], normalized.
BidDistribution bid_distribution(const SocialState& state);

// Throws std::domain_error if bid is outside the distribution's support range.
OutcomeKernel win_probability(int bid, const BidDistribution& opponents);

double immediate_reward(double urgency, int bid,
                        const BidDistribution& opponents);

// Average surplus generated per agent under pay-bid-to-society.
double mean_surplus_pbs(const SocialState& state);

KarmaDistribution karma_transition(const Game& game, int k, int bid,
                                   Outcome outcome, const SocialState& state);

// Flat distribution over (u+, k+), index u+ * karma_levels + k+.
std::vector<double> state_transition(const Game& game, int tau, int u, int k,
                                     int bid, const SocialState& state);

double policy_reward(const Game& game, int tau, int u, int k,
                     const SocialState& state);

// Dense row-major matrix over flat (u, k) states.
std::vector<double> policy_transition(const Game& game, int tau,
                                      const SocialState& state);

double karma_preservation_residual(const Game& game, const SocialState& state);

}  // namespace karma

#endif  // KARMA_GAME_MODEL_H_
