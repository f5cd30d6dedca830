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

#ifndef KARMA_SOLVER_H_
#define KARMA_SOLVER_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "karma/game_model.h"
#include "karma/interaction_kernel.h"
#include "karma/markov.h"

namespace karma {

struct SolverParams {
  double dt = 0.2;          // Euler step of the evolutionary dynamics
  double eta = 0.1;         // policy update rate
  double lambda = 1000.0;   // rationality of the perturbed best response
  double v_tol = 1e-12;     // Bellman residual for value evaluation
  double fp_tol = 1e-6;     // stationarity and policy fixed-point residuals
  int max_iters = 100000;
  int max_value_sweeps = 1000000;
  double q_tie_tol = 1e-10;  // relative tolerance for argmax ties
  // Diagnostic records are emitted every log_every iterations (0 disables).
  int log_every = 0;

  // Throws std::invalid_argument (e.g. dt * eta > 1).
  void validate() const;
  bool operator==(const SolverParams&) const = default;
};

// Value of one type: V (discounted) or (sigma, Y) with Y[u_1, 0] = 0.
struct TypeValue {
  bool average_reward = false;
  std::vector<double> values;  // flat (u, k)
  double sigma = 0.0;
  double bellman_residual = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

struct ValueTable {
  std::vector<TypeValue> types;
};

struct SolverDiagnostics {
  double stationarity_residual = 0.0;  // max over types of ||d P - d||_1
  double br_gap = 0.0;       // max |perturbed best response - pi|
  double kp_residual = 0.0;  // karma preservation residual at the result
  double exploitability = 0.0;  // max over d-carrying states of max Q - E_pi Q
  double top_mass = 0.0;        // d-mass in the top 10% of karma levels
  int iterations = 0;
  bool converged = false;
  bool null_conditioning = false;
  std::vector<std::string> warnings;
};

struct EquilibriumResult {
  SocialState social_state;
  ValueTable value;
  SolverDiagnostics diagnostics;
};

// One per-iteration record of the solver's log stream.
struct IterationRecord {
  int iteration = 0;
  double stationarity_residual = 0.0;
  double br_gap = 0.0;
  double mean_karma = 0.0;
  double kp_residual = 0.0;
};
using IterationObserver = std::function<void(const IterationRecord&)>;

// Markov reward process (R_tau, P_tau) of one type under the current policy.
MarkovRewardProcess policy_process(const InteractionKernel& kernel, int tau);

// V_tau for alpha_tau < 1. Throws std::invalid_argument for alpha_tau == 1.
TypeValue evaluate_value(const Game& game, int tau, const SocialState& state,
                         const SolverParams& params,
                         std::span<const double> warm_start = {},
                         bool record_history = false);

// (sigma_tau, Y_tau) for alpha_tau == 1, anchored at Y[u_1, 0] = 0.
TypeValue relative_value(const Game& game, int tau, const SocialState& state,
                         const SolverParams& params,
                         std::span<const double> warm_start = {});

// Single-stage deviation rewards Q[b] for b in 0..k.
std::vector<double> q_values(const Game& game, int tau, int u, int k,
                             const SocialState& state, const TypeValue& value);

struct BestResponse {
  std::vector<int> bids;  // maximizers; any mixture over them is a best response
  double best_q = 0.0;
  std::vector<double> uniform_mixture(int num_bids) const;
};

BestResponse best_response(std::span<const double> q, double q_tie_tol = 1e-10);
BestResponse best_response(const Game& game, int tau, int u, int k,
                           const SocialState& state, const TypeValue& value,
                           double q_tie_tol = 1e-10);

// Softmax of lambda * q, conditioned by subtracting the maximum.
std::vector<double> perturbed_best_response(std::span<const double> q, double lambda);

// One discretized step of the evolutionary dynamics.
SocialState evolution_step(const Game& game, const SocialState& state,
                           const SolverParams& params);

// Requires every discount < 1.
EquilibriumResult solve_equilibrium(const Game& game, const SolverParams& params,
                                    std::optional<SocialState> init = std::nullopt,
                                    const IterationObserver& observer = {});

// Requires every discount == 1.
EquilibriumResult solve_equilibrium_average_reward(
    const Game& game, const SolverParams& params,
    std::optional<SocialState> init = std::nullopt,
    const IterationObserver& observer = {});

// Dispatches on the discount factors; mixed discounted / undiscounted types
// are allowed.
EquilibriumResult solve(const Game& game, const SolverParams& params,
                        std::optional<SocialState> init = std::nullopt,
                        const IterationObserver& observer = {});

// Closed-form myopic (alpha = 0) PBP policy: bid all karma.
SocialState bid_all_policy(const Game& game, const SocialState& distribution);

}  // namespace karma

#endif  // KARMA_SOLVER_H_
