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

#ifndef KARMA_MARKOV_H_
#define KARMA_MARKOV_H_

#include <span>
#include <vector>

namespace karma {

// Row-compressed stochastic matrix.
struct SparseTransition {
  int num_states = 0;
  std::vector<int> row_start;  // size num_states + 1
  std::vector<int> column;
  std::vector<double> probability;

  static SparseTransition from_dense(std::span<const double> dense, int n);

  // out = P v
  void multiply(std::span<const double> v, std::span<double> out) const;
  // out = d P
  void left_multiply(std::span<const double> d, std::span<double> out) const;
};

// A Markov chain with a per-state reward: the process induced by fixing a
// policy in an MDP.
struct MarkovRewardProcess {
  std::vector<double> reward;
  SparseTransition transition;
};

struct ValueIterationResult {
  std::vector<double> values;
  double sigma = 0.0;             // average reward (relative iteration only)
  double bellman_residual = 0.0;  // sup-norm residual of the returned values
  int sweeps = 0;
  bool converged = false;
  std::vector<double> residual_history;  // filled only on request
};

// Fixed-point iteration of V = R + alpha P V until the Bellman residual is at
// most tol. Requires alpha < 1.
ValueIterationResult discounted_value_iteration(
    const MarkovRewardProcess& mrp, double alpha, double tol, int max_sweeps,
    std::span<const double> warm_start = {}, bool record_history = false);

// Relative value iteration for sigma + Y = R + P Y with Y[anchor] = 0.
ValueIterationResult relative_value_iteration(
    const MarkovRewardProcess& mrp, int anchor, double tol, int max_sweeps,
    std::span<const double> warm_start = {}, bool record_history = false);

// Same fixed points, solved by a dense LU factorization and then certified by
// value-iteration sweeps starting from the factorized solution.
ValueIterationResult discounted_value_direct(const MarkovRewardProcess& mrp,
                                             double alpha, double tol,
                                             int max_sweeps);
ValueIterationResult relative_value_direct(const MarkovRewardProcess& mrp,
                                           int anchor, double tol, int max_sweeps);

}  // namespace karma

#endif  // KARMA_MARKOV_H_
