// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/mdp.hpp"
#include "cpl/objectives.hpp"
#include "cpl/oracle.hpp"
#include "cpl/table.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cpl {

/// Tabular softmax policy; pi(.|s) = softmax(logits(s, .)).
struct PolicyLogits {
  Table logits;

  Table log_policy() const { return row_log_softmax(logits); }
  Table policy() const { return row_softmax(logits); }
};

PolicyLogits zero_logits(std::size_t num_states, std::size_t num_actions);

enum class OptimizerMethod { gradient_descent, momentum, adaptive_moment };

std::string_view to_string(OptimizerMethod m) noexcept;
OptimizerMethod parse_optimizer_method(std::string_view s);

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::adaptive_moment;
  double learning_rate = 1e-2;
  std::size_t steps = 5000;
  /// BC steps run before preference training; 0 keeps the given initialization.
  std::size_t pretrain_steps = 0;
  std::uint64_t seed = 0;
  /// Stop once the gradient sup-norm falls below this.
  double convergence_tol = 1e-8;
  /// Pairs (or ranking groups) per step, drawn with replacement; 0 = full batch.
  std::size_t batch_size = 0;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct TraceRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double accuracy = 0.0;
  std::optional<double> kl_to_optimal;
  std::optional<double> policy_return;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  bool converged = false;
  std::size_t steps_taken = 0;

  /// step,loss,grad_norm,accuracy,kl_to_optimal,policy_return; missing
  /// evaluation columns are left empty.
  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  PolicyLogits policy;
  TrainTrace trace;
};

/// Loss and gradient at `params` for optimizer step `step`.
using Objective = std::function<LossOutput(const Table& params, std::size_t step)>;
/// Called for every trace record with the parameters it was evaluated at.
using RecordHook = std::function<void(TraceRecord& record, const Table& params)>;

/// First-order minimization of `objective` starting from `params` (updated
/// in place). Each record holds the loss at the parameters before that
/// step's update; a final record is appended at the returned parameters.
/// Throws TrainingError on a non-finite loss or gradient.
TrainTrace minimize(Table& params, const Objective& objective, const OptimizerConfig& config,
                    const RecordHook& hook = {});

/// Maximum-likelihood BC on (s, a) pairs for config.steps steps.
TrainResult bc_pretrain(const PolicyLogits& init, std::span<const StateAction> data,
                        const OptimizerConfig& config);

/// Optional oracle-based evaluation inside the training loop.
struct EvalTarget {
  const TabularMDP* mdp = nullptr;
  const SoftSolution* oracle = nullptr;
  /// Evaluate every n-th step (and the final step); 0 = final step only.
  std::size_t every = 0;
  bool include_entropy = false;
};

/// Optimizes the configured objective. When pretrain_steps > 0 the logits
/// are first fit by BC on data.bc_data (or on every segment step of the
/// dataset when bc_data is empty).
TrainResult train(const PolicyLogits& init, const TrainingData& data, const LossConfig& loss,
                  const OptimizerConfig& config, const std::optional<EvalTarget>& eval = {});

/// Max over logits of |analytic - central difference| / (|analytic| + 1e-8).
double gradient_check(const Table& logits, const TrainingData& data, const LossConfig& loss,
                      double h = 1e-5);

/// Same check for an arbitrary objective.
double gradient_check(const Table& params,
                      const std::function<LossOutput(const Table&)>& objective, double h = 1e-5);

/// mean_s sum_a pi*(a|s) (log pi*(a|s) - log pi(a|s)).
double kl_to_optimal(const Table& pi_star, const Table& log_policy);

/// Largest observed ratio |grad(x + e d) - grad(x)| / |e d| (Euclidean)
/// over `samples` random unit directions at random points within `radius`
/// (sup-norm) of `center`.
double estimate_smoothness(const std::function<LossOutput(const Table&)>& objective,
                           const Table& center, std::size_t samples, double radius,
                           std::uint64_t seed);

}  // namespace cpl
