// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/oracle.hpp"

#include "cpl/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace cpl {

using nlohmann::json;

namespace {

constexpr double kPolicyConsistencyTol = 1e-4;
constexpr double kLoadConsistencyTol = 1e-6;

void fill_derived(SoftSolution& sol) {
  const std::size_t S = sol.q_star.rows();
  const std::size_t A = sol.q_star.cols();
  sol.v_star.resize(S);
  std::vector<double> scaled(A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) scaled[a] = sol.q_star(s, a) / sol.alpha;
    sol.v_star[s] = sol.alpha * log_sum_exp(scaled);
  }
  sol.a_star = Table(S, A);
  sol.pi_star = Table(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      sol.a_star(s, a) = sol.q_star(s, a) - sol.v_star[s];
      sol.pi_star(s, a) = std::exp(sol.a_star(s, a) / sol.alpha);
    }
  }
}

}  // namespace

Table soft_q_from_values(const TabularMDP& mdp, std::span<const double> values) {
  Table q(mdp.num_states, mdp.num_actions);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      double expected = 0.0;
      const auto row = mdp.next_dist(s, a);
      for (std::size_t next = 0; next < mdp.num_states; ++next) expected += row[next] * values[next];
      q(s, a) = mdp.reward(s, a) + mdp.discount * expected;
    }
  }
  return q;
}

std::vector<double> soft_bellman_backup(const TabularMDP& mdp, double alpha,
                                        std::span<const double> values) {
  const Table q = soft_q_from_values(mdp, values);
  std::vector<double> out(mdp.num_states);
  std::vector<double> scaled(mdp.num_actions);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) scaled[a] = q(s, a) / alpha;
    out[s] = alpha * log_sum_exp(scaled);
  }
  return out;
}

SoftSolution soft_value_iteration(const TabularMDP& mdp, double alpha,
                                  const SolverOptions& options) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ParameterError("soft_value_iteration: alpha must be positive");
  if (!(options.tol > 0.0)) throw ParameterError("soft_value_iteration: tol must be positive");
  require_valid(mdp);

  std::vector<double> v(mdp.num_states, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < options.max_iters) {
    std::vector<double> next = soft_bellman_backup(mdp, alpha, v);
    residual = 0.0;
    for (std::size_t s = 0; s < v.size(); ++s) residual = std::max(residual, std::abs(next[s] - v[s]));
    v = std::move(next);
    ++it;
    if (residual <= options.tol) break;
  }
  if (!(residual <= options.tol)) {
    std::ostringstream msg;
    msg << "soft_value_iteration did not converge in " << options.max_iters
        << " iterations (residual " << residual << ")";
    throw SolverError(msg.str(), residual);
  }

  SoftSolution sol;
  sol.alpha = alpha;
  sol.residual = residual;
  sol.iterations = it;
  sol.q_star = soft_q_from_values(mdp, v);
  fill_derived(sol);
  return sol;
}

std::vector<double> verify_consistency(const Table& advantage, double alpha) {
  std::vector<double> errors(advantage.rows());
  for (std::size_t s = 0; s < advantage.rows(); ++s) {
    double total = 0.0;
    for (double adv : advantage.row(s)) total += std::exp(adv / alpha);
    errors[s] = std::abs(total - 1.0);
  }
  return errors;
}

Table policy_from_advantage(const Table& advantage, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("policy_from_advantage: alpha must be positive");
  const auto errors = verify_consistency(advantage, alpha);
  for (std::size_t s = 0; s < errors.size(); ++s) {
    if (!(errors[s] <= kPolicyConsistencyTol)) {
      std::ostringstream msg;
      msg << "advantage row " << s << " is not normalized: |sum exp(A/alpha) - 1| = " << errors[s];
      throw ConsistencyError(msg.str());
    }
  }
  Table pi(advantage.rows(), advantage.cols());
  for (std::size_t s = 0; s < advantage.rows(); ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < advantage.cols(); ++a) total += (pi(s, a) = std::exp(advantage(s, a) / alpha));
    for (std::size_t a = 0; a < advantage.cols(); ++a) pi(s, a) /= total;
  }
  return pi;
}

double segment_advantage_exact(const SoftSolution& solution, const Segment& segment,
                               double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (const auto& step : segment.steps) {
    total += weight * solution.a_star(step.state, step.action);
    weight *= gamma;
  }
  return total;
}

double segment_advantage_telescoped(const SoftSolution& solution, const TabularMDP& mdp,
                                    const Segment& segment, std::size_t next_state,
                                    double gamma) {
  if (segment.steps.empty()) throw ParameterError("segment_advantage_telescoped: empty segment");
  if (next_state >= mdp.num_states)
    throw ParameterError("segment_advantage_telescoped: next state out of range");
  double total = 0.0;
  double weight = 1.0;
  for (const auto& step : segment.steps) {
    total += weight * mdp.reward(step.state, step.action);
    weight *= gamma;
  }
  return weight * solution.v_star[next_state] - solution.v_star[segment.steps.front().state] + total;
}

double segment_advantage_telescoped(const SoftSolution& solution, const TabularMDP& mdp,
                                    const Segment& segment, double gamma) {
  if (!segment.next_state)
    throw ParameterError("segment_advantage_telescoped: segment has no successor state");
  return segment_advantage_telescoped(solution, mdp, segment, *segment.next_state, gamma);
}

std::vector<double> policy_values(const TabularMDP& mdp, const Table& policy,
                                  const ReturnOptions& options) {
  if (!(mdp.discount < 1.0))
    throw ParameterError("policy_return: discount must be below 1 for a finite return");
  require_stochastic_policy(mdp, policy);
  if (options.include_entropy && !(options.alpha > 0.0))
    throw ParameterError("policy_return: alpha must be positive");
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      const double pa = policy(s, a);
      if (pa <= 0.0) continue;
      double r = mdp.reward(s, a);
      if (options.include_entropy) r -= options.alpha * std::log(pa);
      rhs(static_cast<Eigen::Index>(s)) += pa * r;
      const auto row = mdp.next_dist(s, a);
      for (std::size_t next = 0; next < mdp.num_states; ++next)
        system(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next)) -=
            mdp.discount * pa * row[next];
    }
  }
  const Eigen::VectorXd v = system.partialPivLu().solve(rhs);
  return {v.data(), v.data() + v.size()};
}

double policy_return(const TabularMDP& mdp, const Table& policy, const ReturnOptions& options) {
  const auto v = policy_values(mdp, policy, options);
  double total = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) total += mdp.initial_dist[s] * v[s];
  return total;
}

void write_solution_json(std::ostream& out, const SoftSolution& solution) {
  json j;
  j["q_star"] = solution.q_star.to_rows();
  j["v_star"] = solution.v_star;
  j["alpha"] = solution.alpha;
  j["residual"] = solution.residual;
  j["iterations"] = solution.iterations;
  out << j.dump() << '\n';
}

SoftSolution read_solution_json(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("solution JSON parse error: ") + e.what());
  }
  SoftSolution sol;
  std::vector<double> stored_v;
  try {
    sol.q_star = Table::from_rows(j.at("q_star").get<std::vector<std::vector<double>>>());
    stored_v = j.at("v_star").get<std::vector<double>>();
    sol.alpha = j.at("alpha").get<double>();
    sol.residual = j.at("residual").get<double>();
    sol.iterations = j.value("iterations", std::size_t{0});
  } catch (const json::exception& e) {
    throw IoError(std::string("solution JSON schema error: ") + e.what());
  }
  if (!(sol.alpha > 0.0)) throw ParameterError("solution alpha must be positive");
  if (stored_v.size() != sol.q_star.rows()) throw ParameterError("v_star has wrong size");
  fill_derived(sol);
  for (std::size_t s = 0; s < stored_v.size(); ++s) {
    if (!(std::abs(stored_v[s] - sol.v_star[s]) <= kLoadConsistencyTol * std::max(1.0, std::abs(stored_v[s]))))
      throw ConsistencyError("stored v_star disagrees with q_star at state " + std::to_string(s));
  }
  sol.v_star = std::move(stored_v);
  for (std::size_t s = 0; s < sol.q_star.rows(); ++s)
    for (std::size_t a = 0; a < sol.q_star.cols(); ++a) {
      sol.a_star(s, a) = sol.q_star(s, a) - sol.v_star[s];
      sol.pi_star(s, a) = std::exp(sol.a_star(s, a) / sol.alpha);
    }
  const auto errors = verify_consistency(sol.a_star, sol.alpha);
  for (std::size_t s = 0; s < errors.size(); ++s)
    if (!(errors[s] <= kLoadConsistencyTol))
      throw ConsistencyError("loaded solution violates normalization at state " + std::to_string(s));
  return sol;
}

void save_solution(const std::string& path, const SoftSolution& solution) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_solution_json(out, solution);
}

SoftSolution load_solution(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return read_solution_json(in);
}

}  // namespace cpl
