// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/baselines.hpp"

#include "cpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpl {

SftResult sft(const PreferenceDataset& dataset, std::size_t num_states, std::size_t num_actions,
              const OptimizerConfig& config) {
  if (dataset.pairs.empty()) throw ParameterError("sft: dataset has no pairs");
  std::vector<StateAction> all;
  std::vector<StateAction> preferred;
  for (const auto& pair : dataset.pairs) {
    if (pair.mode == LabelMode::soft) throw ParameterError("sft needs hard-oriented pairs");
    for (const auto& step : pair.plus.steps) {
      all.push_back(step);
      preferred.push_back(step);
    }
    for (const auto& step : pair.minus.steps) all.push_back(step);
  }
  OptimizerConfig pre = config;
  pre.steps = config.pretrain_steps > 0 ? config.pretrain_steps : config.steps;
  SftResult result;
  result.pretrained = bc_pretrain(zero_logits(num_states, num_actions), all, pre).policy;
  TrainResult fine = bc_pretrain(result.pretrained, preferred, config);
  result.policy = std::move(fine.policy);
  result.trace = std::move(fine.trace);
  return result;
}

std::vector<std::size_t> top_fraction(std::span<const Trajectory> rollouts, double fraction,
                                      double gamma) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("fraction must lie in (0, 1]");
  if (rollouts.empty()) throw ParameterError("percent_bc: no rollouts");
  std::vector<double> returns(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i)
    returns[i] = trajectory_return(rollouts[i], gamma);
  std::vector<std::size_t> order(rollouts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return returns[a] > returns[b]; });
  const auto keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(rollouts.size()) - 1e-12));
  order.resize(std::clamp<std::size_t>(keep, 1, rollouts.size()));
  return order;
}

PercentBcResult percent_bc(std::span<const Trajectory> rollouts, double fraction,
                           const TabularMDP& mdp, double gamma, const OptimizerConfig& config) {
  PercentBcResult result;
  result.selected = top_fraction(rollouts, fraction, gamma);
  std::vector<StateAction> data;
  for (std::size_t idx : result.selected) {
    const auto& traj = rollouts[idx];
    for (std::size_t t = 0; t < traj.horizon(); ++t)
      data.push_back({traj.states[t], traj.actions[t]});
  }
  TrainResult fit = bc_pretrain(zero_logits(mdp.num_states, mdp.num_actions), data, config);
  result.policy = std::move(fit.policy);
  result.trace = std::move(fit.trace);
  return result;
}

NaiveResult naive_advantage_mle(const PreferenceDataset& dataset, std::size_t num_states,
                                std::size_t num_actions, const LossConfig& loss,
                                const OptimizerConfig& config) {
  if (!(loss.alpha > 0.0)) throw ParameterError("naive_advantage_mle: alpha must be positive");
  NaiveResult result;
  result.advantage = Table(num_states, num_actions);
  result.trace = minimize(
      result.advantage,
      [&](const Table& a, std::size_t) { return naive_advantage_loss(a, dataset, loss); }, config);
  result.policy.logits = result.advantage;
  for (double& x : result.policy.logits.flat()) x /= loss.alpha;
  return result;
}

}  // namespace cpl
