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

#include "karma/game_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "karma/interaction_kernel.h"

namespace karma {
namespace {

std::string join_lines(const std::vector<std::string>& items) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << "\n";
    out << items[i];
  }
  return out.str();
}

}  // namespace

UrgencyChain::UrgencyChain(std::vector<double> values,
                           std::vector<std::vector<double>> transition)
    : values_(std::move(values)) {
  const std::size_t n = values_.size();
  if (n == 0) throw std::invalid_argument("urgency chain: no states");
  for (std::size_t u = 0; u < n; ++u) {
    if (!std::isfinite(values_[u]) || values_[u] < 0.0) {
      throw std::invalid_argument("urgency chain: value " + std::to_string(u) +
                                  " must be finite and non-negative");
    }
  }
  if (transition.size() != n) {
    throw std::invalid_argument("urgency chain: transition must be " +
                                std::to_string(n) + "x" + std::to_string(n));
  }
  transition_.reserve(n * n);
  for (std::size_t u = 0; u < n; ++u) {
    if (transition[u].size() != n) {
      throw std::invalid_argument("urgency chain: transition row " +
                                  std::to_string(u) + " has wrong length");
    }
    double sum = 0.0;
    for (double p : transition[u]) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("urgency chain: transition row " +
                                    std::to_string(u) +
                                    " has an entry outside [0,1]");
      }
      sum += p;
      transition_.push_back(p);
    }
    if (std::abs(sum - 1.0) > kConstructionTolerance) {
      throw std::invalid_argument("urgency chain: transition row " +
                                  std::to_string(u) + " does not sum to 1");
    }
  }

  // Irreducibility: every state reaches every other state.
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
      const std::size_t from = stack.back();
      stack.pop_back();
      for (std::size_t to = 0; to < n; ++to) {
        if (!seen[to] && transition_[from * n + to] > 0.0) {
          seen[to] = true;
          stack.push_back(to);
        }
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw std::invalid_argument("urgency chain: not irreducible");
    }
  }
}

std::vector<std::vector<double>> UrgencyChain::transition_matrix() const {
  const std::size_t n = values_.size();
  std::vector<std::vector<double>> out(n);
  for (std::size_t u = 0; u < n; ++u) {
    out[u].assign(transition_.begin() + u * n, transition_.begin() + (u + 1) * n);
  }
  return out;
}

double UrgencyChain::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

std::vector<double> UrgencyChain::stationary_distribution() const {
  // Solve mu (P - I) = 0 with the last balance equation replaced by sum = 1.
  const int n = num_states();
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      a(i, j) = transition(j, i) - (i == j ? 1.0 : 0.0);
    }
  }
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::VectorXd mu = a.fullPivLu().solve(rhs);
  std::vector<double> out(mu.data(), mu.data() + n);
  for (double& p : out) p = std::max(p, 0.0);
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& p : out) p /= total;
  return out;
}

std::string_view to_string(PaymentRule rule) {
  switch (rule) {
    case PaymentRule::kPayBidToPeer:
      return "PBP";
    case PaymentRule::kPayBidToSociety:
      return "PBS";
  }
  return "?";
}

PaymentRule parse_payment_rule(std::string_view name) {
  if (name == "PBP") return PaymentRule::kPayBidToPeer;
  if (name == "PBS") return PaymentRule::kPayBidToSociety;
  throw std::invalid_argument("unknown payment rule '" + std::string(name) +
                              "' (expected PBP or PBS)");
}

double KarmaTax::amount(int karma) const {
  if (karma <= 0) return 0.0;
  // Never more than the agent holds.
  return std::min(static_cast<double>(karma),
                  coefficient * std::pow(static_cast<double>(karma), exponent));
}

MechanismConfig::MechanismConfig(PaymentRule rule, int k_bar, int k_max,
                                 std::optional<KarmaTax> tax)
    : rule_(rule),
      k_bar_(k_bar),
      k_max_(k_max == 0 ? kDefaultTruncationFactor * k_bar : k_max),
      tax_(tax) {
  if (k_bar_ <= 0) throw std::invalid_argument("mechanism: k_bar must be > 0");
  if (k_max_ <= 0) throw std::invalid_argument("mechanism: k_max must be > 0");
  if (k_bar_ > k_max_) {
    throw std::invalid_argument("mechanism: k_bar must not exceed k_max");
  }
  if (tax_) {
    if (!(tax_->coefficient >= 0.0) || !std::isfinite(tax_->coefficient)) {
      throw std::invalid_argument("mechanism: tax coefficient must be >= 0");
    }
    if (!(tax_->exponent >= 1.0) || !std::isfinite(tax_->exponent)) {
      throw std::invalid_argument("mechanism: tax exponent must be >= 1");
    }
    for (int k = 0; k <= k_max_; ++k) {
      const double h = tax_->amount(k);
      if (h < 0.0 || h > k) {
        throw std::invalid_argument(
            "mechanism: tax h[k] must satisfy 0 <= h[k] <= k; violated at k=" +
            std::to_string(k));
      }
    }
  }
}

Game::Game(std::vector<AgentType> types, MechanismConfig mechanism)
    : types_(std::move(types)), mechanism_(std::move(mechanism)) {
  if (types_.empty()) throw std::invalid_argument("game: no agent types");
  double total = 0.0;
  for (std::size_t t = 0; t < types_.size(); ++t) {
    const AgentType& type = types_[t];
    if (!(type.discount >= 0.0 && type.discount <= 1.0)) {
      throw std::invalid_argument("game: type " + std::to_string(t) +
                                  " discount must lie in [0,1]");
    }
    if (!(type.share > 0.0 && type.share <= 1.0)) {
      throw std::invalid_argument("game: type " + std::to_string(t) +
                                  " share must lie in (0,1]");
    }
    total += type.share;
  }
  if (std::abs(total - 1.0) > kConstructionTolerance) {
    throw std::invalid_argument("game: type shares must sum to 1");
  }
}

double Game::max_urgency() const {
  double out = 0.0;
  for (const AgentType& type : types_) out = std::max(out, type.urgency.max_value());
  return out;
}

SocialState::SocialState(const Game& game) : levels_(game.karma_levels()) {
  const std::size_t levels = levels_;
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const int n_u = game.num_urgency(tau);
    n_u_.push_back(n_u);
    d_.emplace_back(n_u * levels, 0.0);
    std::vector<double> pi(n_u * levels * levels, 0.0);
    for (std::size_t row = 0; row < n_u * levels; ++row) pi[row * levels] = 1.0;
    pi_.push_back(std::move(pi));
  }
}

SocialState SocialState::default_initial(const Game& game) {
  SocialState state(game);
  const int k_bar = game.mechanism().k_bar();
  for (int tau = 0; tau < game.num_types(); ++tau) {
    const std::vector<double> mu = game.type(tau).urgency.stationary_distribution();
    for (int u = 0; u < game.num_urgency(tau); ++u) {
      state.d(tau, u, k_bar) = game.type(tau).share * mu[u];
      for (int k = 0; k < state.levels_; ++k) {
        std::span<double> row = state.policy(tau, u, k);
        std::fill(row.begin(), row.end(), 1.0 / (k + 1));
      }
    }
  }
  return state;
}

double SocialState::type_mass(int tau) const {
  return std::accumulate(d_[tau].begin(), d_[tau].end(), 0.0);
}

double SocialState::mean_karma() const {
  double out = 0.0;
  for (std::size_t tau = 0; tau < d_.size(); ++tau) {
    for (std::size_t i = 0; i < d_[tau].size(); ++i) {
      out += d_[tau][i] * static_cast<double>(i % levels_);
    }
  }
  return out;
}

double SocialState::mean_karma(int tau) const {
  double out = 0.0;
  for (std::size_t i = 0; i < d_[tau].size(); ++i) {
    out += d_[tau][i] * static_cast<double>(i % levels_);
  }
  return out / type_mass(tau);
}

std::vector<std::string> SocialState::violations(
    const Game& game, double karma_drift_tolerance) const {
  std::vector<std::string> out;
  if (num_types() != game.num_types() || levels_ != game.karma_levels()) {
    out.push_back("social state dimensions do not match the game");
    return out;
  }
  for (int tau = 0; tau < num_types(); ++tau) {
    const std::string prefix = "type[" + std::to_string(tau) + "]";
    if (n_u_[tau] != game.num_urgency(tau)) {
      out.push_back(prefix + ": urgency dimension does not match the game");
      continue;
    }
    double mass = 0.0;
    for (int u = 0; u < n_u_[tau]; ++u) {
      for (int k = 0; k < levels_; ++k) {
        const double v = d(tau, u, k);
        if (!(v >= 0.0) || !std::isfinite(v)) {
          out.push_back(prefix + ".d[" + std::to_string(u) + "][" +
                        std::to_string(k) + "]: must be non-negative");
        }
        mass += v;
        const std::span<const double> full(
            pi_[tau].data() + row_offset(u, k), static_cast<std::size_t>(levels_));
        double row_sum = 0.0;
        bool negative = false;
        bool infeasible = false;
        for (int b = 0; b < levels_; ++b) {
          if (!(full[b] >= 0.0)) negative = true;
          if (b > k && full[b] != 0.0) infeasible = true;
          row_sum += full[b];
        }
        const std::string where = prefix + ".pi[" + std::to_string(u) + "][" +
                                  std::to_string(k) + "]";
        if (negative) out.push_back(where + ": negative probability");
        if (infeasible) out.push_back(where + ": positive probability on a bid above the karma");
        if (std::abs(row_sum - 1.0) > kDistributionTolerance) {
          std::ostringstream msg;
          msg << where << ": probabilities sum to " << row_sum << ", expected 1";
          out.push_back(msg.str());
        }
      }
    }
    if (std::abs(mass - game.type(tau).share) > kDistributionTolerance) {
      std::ostringstream msg;
      msg << prefix << ".d: mass " << mass << " differs from type share "
          << game.type(tau).share;
      out.push_back(msg.str());
    }
  }
  const double drift = std::abs(mean_karma() - game.mechanism().k_bar());
  if (drift > karma_drift_tolerance) {
    std::ostringstream msg;
    msg << "d: mean karma " << mean_karma() << " differs from k_bar "
        << game.mechanism().k_bar();
    out.push_back(msg.str());
  }
  return out;
}

void SocialState::validate(const Game& game, double karma_drift_tolerance) const {
  const std::vector<std::string> problems = violations(game, karma_drift_tolerance);
  if (!problems.empty()) throw std::invalid_argument(join_lines(problems));
}

BidDistribution::BidDistribution(std::vector<double> probabilities)
    : probabilities_(std::move(probabilities)) {
  if (probabilities_.empty()) throw std::invalid_argument("bid distribution: empty");
  double total = 0.0;
  for (double p : probabilities_) {
    if (!(p >= 0.0)) throw std::invalid_argument("bid distribution: negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > kDistributionTolerance) {
    throw std::invalid_argument("bid distribution: does not sum to 1");
  }
}

BidDistribution BidDistribution::point_mass(int levels, int bid) {
  std::vector<double> p(levels, 0.0);
  p.at(bid) = 1.0;
  return BidDistribution(std::move(p));
}

BidDistribution bid_distribution(const SocialState& state) {
  const int levels = state.karma_levels();
  std::vector<double> nu(levels, 0.0);
  for (int tau = 0; tau < state.num_types(); ++tau) {
    for (int u = 0; u < state.num_urgency(tau); ++u) {
      for (int k = 0; k < levels; ++k) {
        const double mass = state.d(tau, u, k);
        if (mass == 0.0) continue;
        const std::span<const double> row = state.policy(tau, u, k);
        for (int b = 0; b <= k; ++b) nu[b] += mass * row[b];
      }
    }
  }
  const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
  if (total > 0.0) {
    for (double& p : nu) p /= total;
  }
  return BidDistribution(std::move(nu));
}

OutcomeKernel win_probability(int bid, const BidDistribution& opponents) {
  if (bid < 0 || bid >= opponents.size()) {
    throw std::domain_error("win_probability: bid " + std::to_string(bid) +
                            " outside 0.." + std::to_string(opponents.size() - 1));
  }
  double below = 0.0;
  for (int b = 0; b < bid; ++b) below += opponents[b];
  OutcomeKernel out;
  out.p_selected = std::min(1.0, below + 0.5 * opponents[bid]);
  out.p_yield = 1.0 - out.p_selected;
  return out;
}

double immediate_reward(double urgency, int bid, const BidDistribution& opponents) {
  return -urgency * win_probability(bid, opponents).p_yield;
}

double mean_surplus_pbs(const SocialState& state) {
  const BidDistribution nu = bid_distribution(state);
  double out = 0.0;
  for (int b = 1; b < nu.size(); ++b) {
    out += nu[b] * win_probability(b, nu).p_selected * b;
  }
  return out;
}

KarmaDistribution karma_transition(const Game& game, int k, int bid,
                                   Outcome outcome, const SocialState& state) {
  return InteractionKernel(game, state).karma_transition(k, bid, outcome);
}

std::vector<double> state_transition(const Game& game, int tau, int u, int k,
                                     int bid, const SocialState& state) {
  return InteractionKernel(game, state).state_transition(tau, u, k, bid);
}

double policy_reward(const Game& game, int tau, int u, int k,
                     const SocialState& state) {
  return InteractionKernel(game, state).policy_reward(tau, u, k);
}

std::vector<double> policy_transition(const Game& game, int tau,
                                      const SocialState& state) {
  return InteractionKernel(game, state).policy_transition(tau);
}

double karma_preservation_residual(const Game& game, const SocialState& state) {
  return InteractionKernel(game, state).karma_preservation_residual();
}

}  // namespace karma
