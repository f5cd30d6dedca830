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

#include "karma/markov.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace karma {

SparseTransition SparseTransition::from_dense(std::span<const double> dense, int n) {
  SparseTransition out;
  out.num_states = n;
  out.row_start.reserve(n + 1);
  out.row_start.push_back(0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double p = dense[static_cast<std::size_t>(i) * n + j];
      if (p != 0.0) {
        out.column.push_back(j);
        out.probability.push_back(p);
      }
    }
    out.row_start.push_back(static_cast<int>(out.column.size()));
  }
  return out;
}

void SparseTransition::multiply(std::span<const double> v, std::span<double> out) const {
  for (int i = 0; i < num_states; ++i) {
    double acc = 0.0;
    for (int e = row_start[i]; e < row_start[i + 1]; ++e) acc += probability[e] * v[column[e]];
    out[i] = acc;
  }
}

void SparseTransition::left_multiply(std::span<const double> d, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < num_states; ++i) {
    const double mass = d[i];
    if (mass == 0.0) continue;
    for (int e = row_start[i]; e < row_start[i + 1]; ++e) out[column[e]] += mass * probability[e];
  }
}

ValueIterationResult discounted_value_iteration(const MarkovRewardProcess& mrp,
                                                double alpha, double tol,
                                                int max_sweeps,
                                                std::span<const double> warm_start,
                                                bool record_history) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(
        "discounted value iteration needs alpha in [0,1); use relative value "
        "iteration for alpha = 1");
  }
  const int n = mrp.transition.num_states;
  ValueIterationResult result;
  result.values.assign(n, 0.0);
  if (warm_start.size() == static_cast<std::size_t>(n)) {
    std::copy(warm_start.begin(), warm_start.end(), result.values.begin());
  }
  std::vector<double> next(n);
  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    mrp.transition.multiply(result.values, next);
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      next[i] = mrp.reward[i] + alpha * next[i];
      residual = std::max(residual, std::abs(next[i] - result.values[i]));
    }
    if (record_history) result.residual_history.push_back(residual);
    result.bellman_residual = residual;
    result.sweeps = sweep;
    if (residual <= tol) {
      // The residual certifies the current iterate; keep it.
      result.converged = true;
      return result;
    }
    if (sweep == max_sweeps) break;
    result.values.swap(next);
  }
  return result;
}

ValueIterationResult relative_value_iteration(const MarkovRewardProcess& mrp,
                                              int anchor, double tol,
                                              int max_sweeps,
                                              std::span<const double> warm_start,
                                              bool record_history) {
  const int n = mrp.transition.num_states;
  if (anchor < 0 || anchor >= n) throw std::invalid_argument("anchor state out of range");
  ValueIterationResult result;
  result.values.assign(n, 0.0);
  if (warm_start.size() == static_cast<std::size_t>(n)) {
    std::copy(warm_start.begin(), warm_start.end(), result.values.begin());
    const double offset = result.values[anchor];
    for (double& y : result.values) y -= offset;
  }
  std::vector<double> next(n);
  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    mrp.transition.multiply(result.values, next);
    for (int i = 0; i < n; ++i) next[i] += mrp.reward[i];
    // next = R + P Y. sigma is read off the anchor, so the residual of
    // sigma + Y = R + P Y is the sup-norm distance of next - sigma from Y.
    const double sigma = next[anchor];
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      next[i] -= sigma;
      residual = std::max(residual, std::abs(next[i] - result.values[i]));
    }
    next[anchor] = 0.0;
    if (record_history) result.residual_history.push_back(residual);
    result.sigma = sigma;
    result.bellman_residual = residual;
    result.sweeps = sweep;
    if (residual <= tol) {
      result.converged = true;
      return result;
    }
    if (sweep == max_sweeps) break;
    result.values.swap(next);
  }
  return result;
}

namespace {

Eigen::MatrixXd dense_matrix(const SparseTransition& p) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.num_states, p.num_states);
  for (int i = 0; i < p.num_states; ++i) {
    for (int e = p.row_start[i]; e < p.row_start[i + 1]; ++e) {
      out(i, p.column[e]) += p.probability[e];
    }
  }
  return out;
}

}  // namespace

ValueIterationResult discounted_value_direct(const MarkovRewardProcess& mrp,
                                             double alpha, double tol,
                                             int max_sweeps) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("discounted value solve needs alpha in [0,1)");
  }
  const int n = mrp.transition.num_states;
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(n, n) - alpha * dense_matrix(mrp.transition);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(mrp.reward.data(), n);
  const Eigen::VectorXd v = a.partialPivLu().solve(r);
  return discounted_value_iteration(mrp, alpha, tol, max_sweeps,
                                    std::span<const double>(v.data(), n));
}

ValueIterationResult relative_value_direct(const MarkovRewardProcess& mrp,
                                           int anchor, double tol, int max_sweeps) {
  const int n = mrp.transition.num_states;
  if (anchor < 0 || anchor >= n) throw std::invalid_argument("anchor state out of range");
  // Unknowns (Y, sigma): (I - P) Y + sigma 1 = R, Y[anchor] = 0.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  a.topLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n) - dense_matrix(mrp.transition);
  a.topRightCorner(n, 1).setOnes();
  a(n, anchor) = 1.0;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n + 1);
  r.head(n) = Eigen::Map<const Eigen::VectorXd>(mrp.reward.data(), n);
  const Eigen::VectorXd x = a.partialPivLu().solve(r);
  return relative_value_iteration(mrp, anchor, tol, max_sweeps,
                                  std::span<const double>(x.data(), n));
}

}  // namespace karma
