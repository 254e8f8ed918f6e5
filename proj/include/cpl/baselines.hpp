// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/mdp.hpp"
#include "cpl/objectives.hpp"
#include "cpl/preference.hpp"
#include "cpl/trainer.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace cpl {

struct SftResult {
  PolicyLogits pretrained;
  PolicyLogits policy;
  TrainTrace trace;
};

/// BC on every segment step (config.pretrain_steps, or config.steps when
/// that is 0), then BC on the preferred segments for config.steps steps.
/// Throws ParameterError for an empty dataset or soft-mode pairs.
SftResult sft(const PreferenceDataset& dataset, std::size_t num_states, std::size_t num_actions,
              const OptimizerConfig& config);

struct PercentBcResult {
  PolicyLogits policy;
  /// Cloned trajectories, best first.
  std::vector<std::size_t> selected;
  TrainTrace trace;
};

/// Ranks trajectories by discounted true return (ties by index), keeps the
/// top ceil(fraction * N) and clones them. fraction must lie in (0, 1].
PercentBcResult percent_bc(std::span<const Trajectory> rollouts, double fraction,
                           const TabularMDP& mdp, double gamma, const OptimizerConfig& config);

/// Indices that percent_bc would clone.
std::vector<std::size_t> top_fraction(std::span<const Trajectory> rollouts, double fraction,
                                      double gamma);

struct NaiveResult {
  /// Unconstrained A_theta[S][A].
  Table advantage;
  /// Logits A_theta / alpha.
  PolicyLogits policy;
  TrainTrace trace;
};

/// Boltzmann MLE over an unconstrained advantage table from zero, followed
/// by the row softmax of A_theta / loss.alpha.
NaiveResult naive_advantage_mle(const PreferenceDataset& dataset, std::size_t num_states,
                                std::size_t num_actions, const LossConfig& loss,
                                const OptimizerConfig& config);

}  // namespace cpl
