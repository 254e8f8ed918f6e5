// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/rng.hpp"
#include "cpl/table.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpl {

struct StateAction {
  std::size_t state = 0;
  std::size_t action = 0;

  auto operator<=>(const StateAction&) const = default;
};

/// Finite discounted MDP with a state-action reward table.
///
/// `transition` is stored flat as [S][A][S]; use `p()` / `next_dist()` to
/// index it. Terminal states are ordinary absorbing self-loops with zero
/// reward; `terminal_mask` only records which states were built that way.
struct TabularMDP {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> transition;
  Table reward;
  double discount = 0.0;
  std::vector<double> initial_dist;
  std::vector<bool> terminal_mask;

  double p(std::size_t s, std::size_t a, std::size_t next) const noexcept {
    return transition[(s * num_actions + a) * num_states + next];
  }
  double& p(std::size_t s, std::size_t a, std::size_t next) noexcept {
    return transition[(s * num_actions + a) * num_states + next];
  }
  std::span<const double> next_dist(std::size_t s, std::size_t a) const noexcept {
    return {transition.data() + (s * num_actions + a) * num_states, num_states};
  }

  /// Allocates zeroed storage for an S x A instance.
  static TabularMDP zeros(std::size_t num_states, std::size_t num_actions, double discount);
};

struct Trajectory {
  std::vector<std::size_t> states;   // horizon + 1 entries
  std::vector<std::size_t> actions;  // horizon entries
  std::vector<double> rewards;       // horizon entries

  std::size_t horizon() const noexcept { return actions.size(); }
};

/// Contiguous window of (state, action) steps taken from one trajectory.
struct Segment {
  std::vector<StateAction> steps;
  std::size_t source_trajectory = 0;
  std::size_t source_offset = 0;
  /// State reached after the last step, when known (needed by the
  /// telescoped regret estimator).
  std::optional<std::size_t> next_state;

  std::size_t length() const noexcept { return steps.size(); }
};

/// Lexicographic order on the (state, action) sequences only.
std::strong_ordering compare_steps(const Segment& a, const Segment& b);

struct GridCell {
  std::size_t x = 0;
  std::size_t y = 0;
};

struct GridworldSpec {
  std::size_t width = 2;
  std::size_t height = 2;
  GridCell goal{1, 1};
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double slip_prob = 0.0;
  double gamma = 0.99;
};

enum GridAction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

/// Four-action gridworld. State index is y * width + x. With probability
/// slip_prob the chosen action is replaced by one drawn uniformly from all
/// four. Moves off the grid leave the agent in place. The goal is an
/// absorbing zero-reward state; reward is goal_reward for a transition that
/// enters the goal and step_reward otherwise (expected over slips). The
/// initial distribution is uniform over non-goal cells.
TabularMDP build_gridworld(const GridworldSpec& spec);

std::size_t grid_state(const GridworldSpec& spec, GridCell cell) noexcept;

/// One state, every action a self-loop with reward action_rewards[i].
TabularMDP build_single_state_bandit(std::span<const double> action_rewards, double gamma = 0.9);

/// Dense random instance: transition rows and the initial distribution are
/// normalized uniform(0,1) draws, rewards are uniform in [reward_lo, reward_hi).
TabularMDP build_random_mdp(std::size_t num_states, std::size_t num_actions, double gamma,
                            std::uint64_t seed, double reward_lo = 0.0, double reward_hi = 1.0);

/// Human-readable invariant violations; empty iff the instance is valid.
std::vector<std::string> validate(const TabularMDP& mdp);

/// Throws ParameterError listing the violations, if any.
void require_valid(const TabularMDP& mdp);

/// Throws ParameterError if policy is not [S][A] with rows summing to 1 (1e-9).
void require_stochastic_policy(const TabularMDP& mdp, const Table& policy);

Trajectory sample_rollout(const TabularMDP& mdp, const Table& policy, std::size_t horizon,
                          std::uint64_t seed);
Trajectory sample_rollout(const TabularMDP& mdp, const Table& policy, std::size_t horizon,
                          Rng& rng);

/// sum_{t=0}^{k-1} gamma^t r(s_t, a_t).
double partial_return(const Segment& segment, const TabularMDP& mdp, double gamma);

/// Discounted true return of a whole trajectory.
double trajectory_return(const Trajectory& trajectory, double gamma);

void write_mdp_json(std::ostream& out, const TabularMDP& mdp);
TabularMDP read_mdp_json(std::istream& in);
void save_mdp(const std::string& path, const TabularMDP& mdp);
TabularMDP load_mdp(const std::string& path);

}  // namespace cpl
