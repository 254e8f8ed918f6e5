// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/mdp.hpp"
#include "cpl/table.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cpl {

/// Fixed point of the soft (maximum-entropy) Bellman backup.
///
/// a_star is q_star minus v_star broadcast over actions, and
/// pi_star = exp(a_star / alpha), so every row of exp(a_star / alpha) sums to
/// one up to the solver tolerance.
struct SoftSolution {
  Table q_star;
  std::vector<double> v_star;
  Table a_star;
  Table pi_star;
  double alpha = 0.1;
  double residual = 0.0;
  std::size_t iterations = 0;
};

struct SolverOptions {
  double tol = 1e-10;
  std::size_t max_iters = 1'000'000;
};

/// One application of V(s) <- alpha * log sum_a exp((r + gamma P V)(s, a) / alpha).
std::vector<double> soft_bellman_backup(const TabularMDP& mdp, double alpha,
                                        std::span<const double> values);

/// r(s, a) + gamma * sum_s' p(s'|s, a) V(s').
Table soft_q_from_values(const TabularMDP& mdp, std::span<const double> values);

/// Iterates the soft backup from V = 0 until the sup-norm change is <= tol.
/// Throws SolverError (carrying the last residual) after max_iters.
SoftSolution soft_value_iteration(const TabularMDP& mdp, double alpha,
                                  const SolverOptions& options = {});

/// exp(A / alpha) renormalized per row. Throws ConsistencyError if some row
/// of exp(A / alpha) is more than 1e-4 away from summing to one.
Table policy_from_advantage(const Table& advantage, double alpha);

/// |sum_a exp(A(s,a) / alpha) - 1| for every state.
std::vector<double> verify_consistency(const Table& advantage, double alpha);

/// sum_t gamma^t A*(s_t, a_t), the negated discounted regret of a segment.
double segment_advantage_exact(const SoftSolution& solution, const Segment& segment,
                               double gamma);

/// gamma^k V*(s_k) - V*(s_0) + sum_t gamma^t r(s_t, a_t), with s_k the state
/// reached after the last step. Equals the exact score under deterministic
/// dynamics.
double segment_advantage_telescoped(const SoftSolution& solution, const TabularMDP& mdp,
                                    const Segment& segment, std::size_t next_state,
                                    double gamma);

/// Same, using segment.next_state; throws ParameterError if it is unset.
double segment_advantage_telescoped(const SoftSolution& solution, const TabularMDP& mdp,
                                    const Segment& segment, double gamma);

struct ReturnOptions {
  /// Add the entropy bonus -alpha * log pi(a|s) to every reward.
  bool include_entropy = false;
  double alpha = 0.1;
};

/// Expected discounted return from initial_dist, by a dense linear solve of
/// (I - gamma P_pi) v = r_pi.
double policy_return(const TabularMDP& mdp, const Table& policy, const ReturnOptions& options = {});

/// Per-state values of a policy (same linear system).
std::vector<double> policy_values(const TabularMDP& mdp, const Table& policy,
                                  const ReturnOptions& options = {});

/// Serialized fields: q_star, v_star, alpha, residual, iterations.
void write_solution_json(std::ostream& out, const SoftSolution& solution);
/// Rebuilds a_star and pi_star and checks consistency to 1e-6.
SoftSolution read_solution_json(std::istream& in);
void save_solution(const std::string& path, const SoftSolution& solution);
SoftSolution load_solution(const std::string& path);

}  // namespace cpl
