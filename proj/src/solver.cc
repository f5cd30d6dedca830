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

#include "karma/solver.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace karma {
namespace {

// exp(x) underflows to zero below this.
constexpr double kExpUnderflow = -745.0;
// States lighter than this are ignored by the exploitability diagnostic.
constexpr double kNegligibleMass = 1e-8;

// Everything one iteration of the dynamics needs, evaluated at (d, pi).
struct Analysis {
  std::vector<TypeValue> values;
  std::vector<std::vector<double>> target_policy;  // perturbed best response
  std::vector<std::vector<double>> next_d;         // d P
  double stationarity = 0.0;
  double br_gap = 0.0;
  double kp_residual = 0.0;
  double exploitability = 0.0;
  bool null_conditioning = false;
};

TypeValue evaluate_type(const InteractionKernel& kernel, int tau,
                        const SolverParams& params, std::span<const double> warm,
                        bool record_history, bool direct) {
  const AgentType& type = kernel.game().type(tau);
  const MarkovRewardProcess mrp = policy_process(kernel, tau);
  ValueIterationResult vi;
  TypeValue out;
  if (type.average_reward()) {
    vi = direct ? relative_value_direct(mrp, /*anchor=*/0, params.v_tol,
                                        params.max_value_sweeps)
                : relative_value_iteration(mrp, /*anchor=*/0, params.v_tol,
                                           params.max_value_sweeps, warm,
                                           record_history);
    out.average_reward = true;
  } else {
    vi = direct ? discounted_value_direct(mrp, type.discount, params.v_tol,
                                          params.max_value_sweeps)
                : discounted_value_iteration(mrp, type.discount, params.v_tol,
                                             params.max_value_sweeps, warm,
                                             record_history);
  }
  out.values = std::move(vi.values);
  out.sigma = vi.sigma;
  out.bellman_residual = vi.bellman_residual;
  out.sweeps = vi.sweeps;
  out.converged = vi.converged;
  out.residual_history = std::move(vi.residual_history);
  return out;
}

// Expected value at the next interaction as a function of next karma, for an
// agent currently at urgency u, already averaged over the tax step.
std::vector<double> next_value_by_karma(const InteractionKernel& kernel, int tau,
                                        int u, std::span<const double> values) {
  const UrgencyChain& chain = kernel.game().type(tau).urgency;
  const int levels = kernel.karma_levels();
  std::vector<double> w(levels, 0.0);
  for (int up = 0; up < chain.num_states(); ++up) {
    const double phi = chain.transition(u, up);
    if (phi == 0.0) continue;
    for (int k = 0; k < levels; ++k) w[k] += phi * values[up * levels + k];
  }
  return kernel.expected_after_tax(w);
}

void fill_q(const InteractionKernel& kernel, int tau, int u, int k,
            std::span<const double> w_tax, std::span<double> q) {
  const AgentType& type = kernel.game().type(tau);
  const double alpha = type.average_reward() ? 1.0 : type.discount;
  const double urgency = type.urgency.value(u);
  kernel.continuation(k, w_tax, q);
  for (int b = 0; b <= k; ++b) q[b] = kernel.reward(urgency, b) + alpha * q[b];
}

void softmax_into(std::span<const double> q, double lambda, std::span<double> out) {
  const double best = *std::max_element(q.begin(), q.end());
  double total = 0.0;
  for (std::size_t b = 0; b < q.size(); ++b) {
    const double x = lambda * (q[b] - best);
    out[b] = x < kExpUnderflow ? 0.0 : std::exp(x);
    total += out[b];
  }
  for (std::size_t b = 0; b < q.size(); ++b) out[b] /= total;
}

Analysis analyze(const Game& game, const SocialState& state,
                 const SolverParams& params) {
  const InteractionKernel kernel(game, state);
  const int levels = game.karma_levels();
  const std::size_t L = levels;
  Analysis a;
  a.kp_residual = kernel.karma_preservation_residual();
  a.null_conditioning = kernel.has_null_outcomes();
  std::vector<double> q(L);
  for (int tau = 0; tau < game.num_types(); ++tau) {
    a.values.push_back(evaluate_type(kernel, tau, params, {}, false, /*direct=*/true));
    const std::vector<double>& values = a.values.back().values;

    const int n_u = game.num_urgency(tau);
    std::vector<double> target(n_u * L * L, 0.0);
    for (int u = 0; u < n_u; ++u) {
      const std::vector<double> w_tax = next_value_by_karma(kernel, tau, u, values);
      for (int k = 0; k < levels; ++k) {
        std::span<double> qk(q.data(), k + 1);
        fill_q(kernel, tau, u, k, w_tax, qk);
        std::span<double> row(target.data() + (u * L + k) * L, k + 1);
        softmax_into(qk, params.lambda, row);
        const std::span<const double> current = state.policy(tau, u, k);
        double expected_q = 0.0;
        for (int b = 0; b <= k; ++b) {
          a.br_gap = std::max(a.br_gap, std::abs(row[b] - current[b]));
          expected_q += current[b] * qk[b];
        }
        if (state.d(tau, u, k) > kNegligibleMass) {
          const double best = *std::max_element(qk.begin(), qk.end());
          a.exploitability = std::max(a.exploitability, best - expected_q);
        }
      }
    }
    a.target_policy.push_back(std::move(target));

    const MarkovRewardProcess mrp = policy_process(kernel, tau);
    std::vector<double> next(n_u * L);
    mrp.transition.left_multiply(state.distribution(tau), next);
    double residual = 0.0;
    const std::span<const double> d = state.distribution(tau);
    for (std::size_t i = 0; i < next.size(); ++i) residual += std::abs(next[i] - d[i]);
    a.stationarity = std::max(a.stationarity, residual);
    a.next_d.push_back(std::move(next));
  }
  return a;
}

SocialState apply_step(const SocialState& state, const Analysis& a,
                       const SolverParams& params) {
  SocialState next = state;
  const double dt = params.dt;
  const double step = params.eta * params.dt;
  for (int tau = 0; tau < next.num_types(); ++tau) {
    std::span<double> d = next.distribution(tau);
    const std::vector<double>& dp = a.next_d[tau];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (1.0 - dt) * d[i] + dt * dp[i];
    std::span<double> pi = next.policy_storage(tau);
    const std::vector<double>& target = a.target_policy[tau];
    for (std::size_t i = 0; i < pi.size(); ++i) {
      pi[i] = (1.0 - step) * pi[i] + step * target[i];
    }
  }
  return next;
}

double top_decile_mass(const SocialState& state) {
  const int levels = state.karma_levels();
  const int k_max = levels - 1;
  double mass = 0.0;
  for (int tau = 0; tau < state.num_types(); ++tau) {
    for (int u = 0; u < state.num_urgency(tau); ++u) {
      for (int k = 0; k < levels; ++k) {
        if (k > 0.9 * k_max) mass += state.d(tau, u, k);
      }
    }
  }
  return mass;
}

EquilibriumResult run_dynamics(const Game& game, const SolverParams& params,
                               std::optional<SocialState> init,
                               const IterationObserver& observer) {
  params.validate();
  SocialState state = init ? std::move(*init) : SocialState::default_initial(game);
  state.validate(game, 1e-6 * game.mechanism().k_bar());

  for (int iteration = 0;; ++iteration) {
    Analysis a = analyze(game, state, params);
    const bool converged =
        a.stationarity <= params.fp_tol && a.br_gap <= params.fp_tol;
    const bool log_now = observer && params.log_every > 0 &&
                         (iteration % params.log_every == 0 || converged ||
                          iteration == params.max_iters);
    if (log_now) {
      observer({iteration, a.stationarity, a.br_gap, state.mean_karma(), a.kp_residual});
    }
    if (converged || iteration >= params.max_iters) {
      EquilibriumResult result{state, ValueTable{std::move(a.values)}, {}};
      SolverDiagnostics& diag = result.diagnostics;
      diag.stationarity_residual = a.stationarity;
      diag.br_gap = a.br_gap;
      diag.kp_residual = a.kp_residual;
      diag.exploitability = a.exploitability;
      diag.iterations = iteration;
      diag.converged = converged;
      diag.null_conditioning = a.null_conditioning;
      diag.top_mass = top_decile_mass(state);
      if (diag.top_mass > 1e-4) {
        std::ostringstream msg;
        msg << "stationary mass " << diag.top_mass
            << " in the top 10% of karma levels; consider a larger k_max";
        diag.warnings.push_back(msg.str());
      }
      for (std::size_t tau = 0; tau < result.value.types.size(); ++tau) {
        if (!result.value.types[tau].converged) {
          diag.warnings.push_back("value evaluation for type " + std::to_string(tau) +
                                  " hit max_value_sweeps");
        }
      }
      if (!converged) {
        diag.warnings.push_back("dynamics did not converge within max_iters");
      }
      return result;
    }
    state = apply_step(state, a, params);
  }
}

}  // namespace

void SolverParams::validate() const {
  std::vector<std::string> problems;
  if (!(dt > 0.0 && dt <= 1.0)) problems.push_back("dt must lie in (0,1]");
  if (!(eta > 0.0)) problems.push_back("eta must be > 0");
  if (!(dt * eta <= 1.0)) problems.push_back("dt * eta must not exceed 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) problems.push_back("lambda must be finite and >= 0");
  if (!(v_tol > 0.0)) problems.push_back("v_tol must be > 0");
  if (!(fp_tol > 0.0)) problems.push_back("fp_tol must be > 0");
  if (max_iters < 0) problems.push_back("max_iters must be >= 0");
  if (max_value_sweeps < 1) problems.push_back("max_value_sweeps must be >= 1");
  if (!(q_tie_tol >= 0.0)) problems.push_back("q_tie_tol must be >= 0");
  if (log_every < 0) problems.push_back("log_every must be >= 0");
  if (!problems.empty()) {
    std::string msg = "solver params: ";
    for (std::size_t i = 0; i < problems.size(); ++i) {
      msg += (i ? "; " : "") + problems[i];
    }
    throw std::invalid_argument(msg);
  }
}

MarkovRewardProcess policy_process(const InteractionKernel& kernel, int tau) {
  const Game& game = kernel.game();
  const UrgencyChain& chain = game.type(tau).urgency;
  const int n_u = chain.num_states();
  const int levels = kernel.karma_levels();
  MarkovRewardProcess mrp;
  mrp.reward.resize(static_cast<std::size_t>(n_u) * levels);
  SparseTransition& p = mrp.transition;
  p.num_states = n_u * levels;
  p.row_start.reserve(p.num_states + 1);
  p.row_start.push_back(0);
  for (int u = 0; u < n_u; ++u) {
    for (int k = 0; k < levels; ++k) {
      mrp.reward[u * levels + k] = kernel.policy_reward(tau, u, k);
      const std::span<const double> m = kernel.policy_karma_marginal(tau, u, k);
      const auto [first, last] = kernel.policy_karma_support(tau, u, k);
      for (int up = 0; up < n_u; ++up) {
        const double phi = chain.transition(u, up);
        if (phi == 0.0) continue;
        for (int kp = first; kp <= last; ++kp) {
          if (m[kp] == 0.0) continue;
          p.column.push_back(up * levels + kp);
          p.probability.push_back(phi * m[kp]);
        }
      }
      p.row_start.push_back(static_cast<int>(p.column.size()));
    }
  }
  return mrp;
}

TypeValue evaluate_value(const Game& game, int tau, const SocialState& state,
                         const SolverParams& params,
                         std::span<const double> warm_start, bool record_history) {
  if (game.type(tau).average_reward()) {
    throw std::invalid_argument(
        "evaluate_value: discount is 1 for type " + std::to_string(tau) +
        "; use relative_value for the average-reward criterion");
  }
  const InteractionKernel kernel(game, state);
  return evaluate_type(kernel, tau, params, warm_start, record_history, false);
}

TypeValue relative_value(const Game& game, int tau, const SocialState& state,
                         const SolverParams& params,
                         std::span<const double> warm_start) {
  if (!game.type(tau).average_reward()) {
    throw std::invalid_argument("relative_value: discount must be 1 for type " +
                                std::to_string(tau));
  }
  const InteractionKernel kernel(game, state);
  return evaluate_type(kernel, tau, params, warm_start, false, false);
}

std::vector<double> q_values(const Game& game, int tau, int u, int k,
                             const SocialState& state, const TypeValue& value) {
  const InteractionKernel kernel(game, state);
  const std::vector<double> w_tax = next_value_by_karma(kernel, tau, u, value.values);
  std::vector<double> q(k + 1);
  fill_q(kernel, tau, u, k, w_tax, q);
  return q;
}

std::vector<double> BestResponse::uniform_mixture(int num_bids) const {
  std::vector<double> out(num_bids, 0.0);
  for (int b : bids) out[b] = 1.0 / bids.size();
  return out;
}

BestResponse best_response(std::span<const double> q, double q_tie_tol) {
  BestResponse out;
  out.best_q = *std::max_element(q.begin(), q.end());
  const double tol = q_tie_tol * std::max(1.0, std::abs(out.best_q));
  for (std::size_t b = 0; b < q.size(); ++b) {
    if (q[b] >= out.best_q - tol) out.bids.push_back(static_cast<int>(b));
  }
  return out;
}

BestResponse best_response(const Game& game, int tau, int u, int k,
                           const SocialState& state, const TypeValue& value,
                           double q_tie_tol) {
  const std::vector<double> q = q_values(game, tau, u, k, state, value);
  return best_response(q, q_tie_tol);
}

std::vector<double> perturbed_best_response(std::span<const double> q, double lambda) {
  std::vector<double> out(q.size());
  softmax_into(q, lambda, out);
  return out;
}

SocialState evolution_step(const Game& game, const SocialState& state,
                           const SolverParams& params) {
  params.validate();
  const Analysis a = analyze(game, state, params);
  return apply_step(state, a, params);
}

EquilibriumResult solve_equilibrium(const Game& game, const SolverParams& params,
                                    std::optional<SocialState> init,
                                    const IterationObserver& observer) {
  for (int tau = 0; tau < game.num_types(); ++tau) {
    if (game.type(tau).average_reward()) {
      throw std::invalid_argument(
          "solve_equilibrium: type " + std::to_string(tau) +
          " has discount 1; use solve_equilibrium_average_reward");
    }
  }
  return run_dynamics(game, params, std::move(init), observer);
}

EquilibriumResult solve_equilibrium_average_reward(const Game& game,
                                                   const SolverParams& params,
                                                   std::optional<SocialState> init,
                                                   const IterationObserver& observer) {
  for (int tau = 0; tau < game.num_types(); ++tau) {
    if (!game.type(tau).average_reward()) {
      throw std::invalid_argument("solve_equilibrium_average_reward: type " +
                                  std::to_string(tau) + " has discount < 1");
    }
  }
  return run_dynamics(game, params, std::move(init), observer);
}

EquilibriumResult solve(const Game& game, const SolverParams& params,
                        std::optional<SocialState> init,
                        const IterationObserver& observer) {
  return run_dynamics(game, params, std::move(init), observer);
}

SocialState bid_all_policy(const Game& game, const SocialState& distribution) {
  SocialState out = distribution;
  for (int tau = 0; tau < game.num_types(); ++tau) {
    for (int u = 0; u < game.num_urgency(tau); ++u) {
      for (int k = 0; k < game.karma_levels(); ++k) {
        std::span<double> row = out.policy(tau, u, k);
        std::fill(row.begin(), row.end(), 0.0);
        row[k] = 1.0;
      }
    }
  }
  return out;
}

}  // namespace karma
