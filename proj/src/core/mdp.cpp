// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/mdp.hpp"

#include "cpl/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace cpl {

using nlohmann::json;

namespace {
constexpr double kProbTol = 1e-9;
constexpr double kRewardBound = 1e6;
}  // namespace

TabularMDP TabularMDP::zeros(std::size_t num_states, std::size_t num_actions, double discount) {
  TabularMDP m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.transition.assign(num_states * num_actions * num_states, 0.0);
  m.reward = Table(num_states, num_actions);
  m.discount = discount;
  m.initial_dist.assign(num_states, 0.0);
  m.terminal_mask.assign(num_states, false);
  return m;
}

std::strong_ordering compare_steps(const Segment& a, const Segment& b) {
  return std::lexicographical_compare_three_way(a.steps.begin(), a.steps.end(), b.steps.begin(),
                                                b.steps.end());
}

std::size_t grid_state(const GridworldSpec& spec, GridCell cell) noexcept {
  return cell.y * spec.width + cell.x;
}

TabularMDP build_gridworld(const GridworldSpec& spec) {
  if (spec.width < 2 || spec.height < 2)
    throw ParameterError("build_gridworld: width and height must be at least 2");
  if (!(spec.slip_prob >= 0.0 && spec.slip_prob < 1.0))
    throw ParameterError("build_gridworld: slip_prob must lie in [0, 1)");
  if (spec.goal.x >= spec.width || spec.goal.y >= spec.height)
    throw ParameterError("build_gridworld: goal out of bounds");
  if (!(spec.gamma >= 0.0 && spec.gamma < 1.0))
    throw ParameterError("build_gridworld: gamma must lie in [0, 1)");
  if (!std::isfinite(spec.step_reward) || !std::isfinite(spec.goal_reward))
    throw ParameterError("build_gridworld: rewards must be finite");

  const std::size_t n = spec.width * spec.height;
  const std::size_t goal = grid_state(spec, spec.goal);
  TabularMDP m = TabularMDP::zeros(n, 4, spec.gamma);

  auto move = [&](std::size_t s, std::size_t action) {
    std::size_t x = s % spec.width;
    std::size_t y = s / spec.width;
    switch (action) {
      case kUp: y = (y == 0) ? 0 : y - 1; break;
      case kDown: y = std::min(y + 1, spec.height - 1); break;
      case kLeft: x = (x == 0) ? 0 : x - 1; break;
      default: x = std::min(x + 1, spec.width - 1); break;
    }
    return y * spec.width + x;
  };

  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < 4; ++a) {
      if (s == goal) {
        m.p(s, a, s) = 1.0;
        continue;
      }
      for (std::size_t b = 0; b < 4; ++b) {
        const double prob = (b == a ? 1.0 - spec.slip_prob : 0.0) + spec.slip_prob / 4.0;
        if (prob > 0.0) m.p(s, a, move(s, b)) += prob;
      }
      double r = 0.0;
      for (std::size_t next = 0; next < n; ++next) {
        const double prob = m.p(s, a, next);
        if (prob > 0.0) r += prob * (next == goal ? spec.goal_reward : spec.step_reward);
      }
      m.reward(s, a) = r;
    }
  }
  m.terminal_mask[goal] = true;
  for (std::size_t s = 0; s < n; ++s)
    m.initial_dist[s] = (s == goal) ? 0.0 : 1.0 / static_cast<double>(n - 1);
  return m;
}

TabularMDP build_single_state_bandit(std::span<const double> action_rewards, double gamma) {
  if (action_rewards.size() < 2)
    throw ParameterError("build_single_state_bandit: need at least 2 actions");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ParameterError("build_single_state_bandit: gamma must lie in [0, 1)");
  TabularMDP m = TabularMDP::zeros(1, action_rewards.size(), gamma);
  for (std::size_t a = 0; a < action_rewards.size(); ++a) {
    if (!std::isfinite(action_rewards[a]))
      throw ParameterError("build_single_state_bandit: rewards must be finite");
    m.p(0, a, 0) = 1.0;
    m.reward(0, a) = action_rewards[a];
  }
  m.initial_dist[0] = 1.0;
  return m;
}

TabularMDP build_random_mdp(std::size_t num_states, std::size_t num_actions, double gamma,
                            std::uint64_t seed, double reward_lo, double reward_hi) {
  if (num_states == 0 || num_actions == 0)
    throw ParameterError("build_random_mdp: empty state or action space");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ParameterError("build_random_mdp: gamma must lie in [0, 1)");
  if (!(reward_lo <= reward_hi)) throw ParameterError("build_random_mdp: bad reward range");
  Rng rng(seed);
  TabularMDP m = TabularMDP::zeros(num_states, num_actions, gamma);
  for (std::size_t s = 0; s < num_states; ++s) {
    for (std::size_t a = 0; a < num_actions; ++a) {
      double total = 0.0;
      for (std::size_t next = 0; next < num_states; ++next) {
        const double w = 0.05 + rng.uniform();
        m.p(s, a, next) = w;
        total += w;
      }
      for (std::size_t next = 0; next < num_states; ++next) m.p(s, a, next) /= total;
      m.reward(s, a) = reward_lo + (reward_hi - reward_lo) * rng.uniform();
    }
  }
  double total = 0.0;
  for (double& w : m.initial_dist) total += (w = 0.05 + rng.uniform());
  for (double& w : m.initial_dist) w /= total;
  return m;
}

std::vector<std::string> validate(const TabularMDP& mdp) {
  std::vector<std::string> out;
  const std::size_t S = mdp.num_states;
  const std::size_t A = mdp.num_actions;
  if (S == 0) out.emplace_back("num_states must be positive");
  if (A == 0) out.emplace_back("num_actions must be positive");
  if (mdp.transition.size() != S * A * S) {
    out.emplace_back("transition tensor has wrong size");
    return out;
  }
  if (mdp.reward.rows() != S || mdp.reward.cols() != A) {
    out.emplace_back("reward table has wrong shape");
    return out;
  }
  if (mdp.initial_dist.size() != S) {
    out.emplace_back("initial_dist has wrong size");
    return out;
  }
  if (!mdp.terminal_mask.empty() && mdp.terminal_mask.size() != S)
    out.emplace_back("terminal_mask has wrong size");
  if (!(mdp.discount >= 0.0 && mdp.discount < 1.0))
    out.emplace_back("discount must lie in [0, 1)");

  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double total = 0.0;
      bool negative = false;
      for (double p : mdp.next_dist(s, a)) {
        if (!(p >= 0.0)) negative = true;
        total += p;
      }
      std::ostringstream where;
      where << "(s=" << s << ", a=" << a << ")";
      if (negative) out.push_back("transition row " + where.str() + " has a negative entry");
      if (!(std::abs(total - 1.0) <= kProbTol)) {
        std::ostringstream msg;
        msg << "transition row " << where.str() << " sums to " << total;
        out.push_back(msg.str());
      }
      const double r = mdp.reward(s, a);
      if (!std::isfinite(r) || std::abs(r) > kRewardBound)
        out.push_back("reward " + where.str() + " is not finite or exceeds 1e6 in magnitude");
    }
  }
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    const double p = mdp.initial_dist[s];
    if (!(p >= 0.0)) out.push_back("initial_dist[" + std::to_string(s) + "] is negative");
    total += p;
  }
  if (!(std::abs(total - 1.0) <= kProbTol)) {
    std::ostringstream msg;
    msg << "initial_dist sums to " << total;
    out.push_back(msg.str());
  }
  return out;
}

void require_valid(const TabularMDP& mdp) {
  const auto violations = validate(mdp);
  if (violations.empty()) return;
  std::string msg = "invalid MDP:";
  for (const auto& v : violations) msg += " " + v + ";";
  throw ParameterError(msg);
}

void require_stochastic_policy(const TabularMDP& mdp, const Table& policy) {
  if (policy.rows() != mdp.num_states || policy.cols() != mdp.num_actions)
    throw ParameterError("policy shape does not match the MDP");
  for (std::size_t s = 0; s < policy.rows(); ++s) {
    double total = 0.0;
    for (double p : policy.row(s)) {
      if (!(p >= 0.0)) throw ParameterError("policy has a negative entry");
      total += p;
    }
    if (!(std::abs(total - 1.0) <= kProbTol))
      throw ParameterError("policy row " + std::to_string(s) + " does not sum to 1");
  }
}

Trajectory sample_rollout(const TabularMDP& mdp, const Table& policy, std::size_t horizon,
                          std::uint64_t seed) {
  Rng rng(seed);
  return sample_rollout(mdp, policy, horizon, rng);
}

Trajectory sample_rollout(const TabularMDP& mdp, const Table& policy, std::size_t horizon,
                          Rng& rng) {
  if (horizon == 0) throw ParameterError("sample_rollout: horizon must be at least 1");
  require_stochastic_policy(mdp, policy);
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.actions.reserve(horizon);
  traj.rewards.reserve(horizon);
  std::size_t s = rng.categorical(mdp.initial_dist);
  traj.states.push_back(s);
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = rng.categorical(policy.row(s));
    traj.actions.push_back(a);
    traj.rewards.push_back(mdp.reward(s, a));
    s = rng.categorical(mdp.next_dist(s, a));
    traj.states.push_back(s);
  }
  return traj;
}

double partial_return(const Segment& segment, const TabularMDP& mdp, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (const auto& step : segment.steps) {
    total += weight * mdp.reward(step.state, step.action);
    weight *= gamma;
  }
  return total;
}

double trajectory_return(const Trajectory& trajectory, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (double r : trajectory.rewards) {
    total += weight * r;
    weight *= gamma;
  }
  return total;
}

void write_mdp_json(std::ostream& out, const TabularMDP& mdp) {
  json j;
  j["num_states"] = mdp.num_states;
  j["num_actions"] = mdp.num_actions;
  j["discount"] = mdp.discount;
  json transition = json::array();
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      const auto row = mdp.next_dist(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transition.push_back(std::move(per_action));
  }
  j["transition"] = std::move(transition);
  j["reward"] = mdp.reward.to_rows();
  j["initial_dist"] = mdp.initial_dist;
  std::vector<bool> mask = mdp.terminal_mask;
  mask.resize(mdp.num_states, false);
  j["terminal_mask"] = mask;
  out << j.dump() << '\n';
}

TabularMDP read_mdp_json(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("MDP JSON parse error: ") + e.what());
  }
  try {
    const auto S = j.at("num_states").get<std::size_t>();
    const auto A = j.at("num_actions").get<std::size_t>();
    TabularMDP m = TabularMDP::zeros(S, A, j.at("discount").get<double>());
    const auto& transition = j.at("transition");
    if (transition.size() != S) throw ParameterError("transition has wrong outer size");
    for (std::size_t s = 0; s < S; ++s) {
      if (transition[s].size() != A) throw ParameterError("transition has wrong action size");
      for (std::size_t a = 0; a < A; ++a) {
        const auto row = transition[s][a].get<std::vector<double>>();
        if (row.size() != S) throw ParameterError("transition row has wrong size");
        for (std::size_t next = 0; next < S; ++next) m.p(s, a, next) = row[next];
      }
    }
    m.reward = Table::from_rows(j.at("reward").get<std::vector<std::vector<double>>>());
    if (m.reward.rows() != S || m.reward.cols() != A)
      throw ParameterError("reward has wrong shape");
    m.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    if (j.contains("terminal_mask")) m.terminal_mask = j["terminal_mask"].get<std::vector<bool>>();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("MDP JSON schema error: ") + e.what());
  }
}

void save_mdp(const std::string& path, const TabularMDP& mdp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_mdp_json(out, mdp);
}

TabularMDP load_mdp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return read_mdp_json(in);
}

}  // namespace cpl
