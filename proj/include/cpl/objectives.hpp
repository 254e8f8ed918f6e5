// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/mdp.hpp"
#include "cpl/preference.hpp"
#include "cpl/table.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cpl {

enum class LossVariant { vanilla, biased, bc_reg, kl_biased, ranking, dense_batch };
/// hard: train on the stored orientation. soft: cross-entropy against label_prob.
enum class TrainLabelMode { hard, soft };
/// Whether per-comparison terms are averaged or summed. Only the step scale
/// of first-order training depends on this.
enum class Reduction { mean, sum };

std::string_view to_string(LossVariant v) noexcept;
LossVariant parse_loss_variant(std::string_view s);
std::string_view to_string(TrainLabelMode m) noexcept;
TrainLabelMode parse_train_label_mode(std::string_view s);
std::string_view to_string(Reduction r) noexcept;
Reduction parse_reduction(std::string_view s);

struct LossConfig {
  LossVariant variant = LossVariant::biased;
  /// Temperature multiplying every log-probability inside the logistic.
  double alpha = 0.1;
  /// Weight on the negative segment's score; 1 recovers the vanilla loss.
  double lambda = 0.5;
  /// Weight of the behavior-cloning term (bc_reg).
  double beta = 0.0;
  /// Discount applied inside segment scores during training.
  double gamma = 1.0;
  /// log mu for the KL-constrained variant, row-normalized [S][A].
  std::optional<Table> reference_log_policy;
  TrainLabelMode label_mode = TrainLabelMode::hard;
  Reduction reduction = Reduction::mean;

  /// Throws ParameterError for out-of-range fields or missing
  /// variant-specific inputs.
  void validate() const;
};

struct LossOutput {
  double loss = 0.0;
  /// Gradient with respect to the policy logits (or the advantage table for
  /// the naive baseline).
  Table grad;
  /// Fraction of comparisons whose preferred side currently scores higher.
  double accuracy = 0.0;
};

/// A segment with the ground-truth score that orders it inside a dense batch.
struct ScoredSegment {
  Segment segment;
  double score = 0.0;
};

/// Everything a configured objective may read.
struct TrainingData {
  PreferenceDataset preferences;
  std::vector<ScoredSegment> batch;
  std::vector<StateAction> bc_data;
};

/// Throws ContractError unless every row satisfies sum_a exp(log_policy) = 1 +- 1e-8.
void require_normalized_log_policy(const Table& log_policy);

/// sum_t gamma^t * alpha * log pi(a_t | s_t).
double segment_log_prob_score(const Table& log_policy, const Segment& segment, double alpha,
                              double gamma);

/// Single-comparison loss -log logistic(alpha * (S+ - lambda * S-)) on
/// already-summed discounted log-likelihoods S+ and S-.
double pair_loss(double loglik_plus, double loglik_minus, double alpha, double lambda) noexcept;

/// Mean (or sum) over pairs of -log logistic(score(plus) - score(minus)).
LossOutput cpl_loss(const Table& log_policy, const PreferenceDataset& dataset,
                    const LossConfig& config);

/// Same with the negative score scaled by config.lambda in (0, 1].
LossOutput cpl_lambda_loss(const Table& log_policy, const PreferenceDataset& dataset,
                           const LossConfig& config);

/// cpl_loss - beta * mean log pi(a|s) over bc_data.
LossOutput cpl_bc_loss(const Table& log_policy, const PreferenceDataset& dataset,
                       const LossConfig& config, std::span<const StateAction> bc_data);

/// lambda-biased loss with per-step terms alpha * (log pi - log mu).
LossOutput cpl_kl_loss(const Table& log_policy, const PreferenceDataset& dataset,
                       const LossConfig& config);

/// Plackett-Luce negative log-likelihood of each best-first ranking,
/// averaged (or summed) over groups.
LossOutput cpl_ranking_loss(const Table& log_policy, std::span<const RankingGroup> rankings,
                            const LossConfig& config);

/// lambda-biased pair loss summed over every ordered pair (i, j) of the batch
/// with segment i ranked above segment j. Ties in the ground-truth score are
/// broken by batch position.
LossOutput dense_batch_loss(const Table& log_policy, std::span<const ScoredSegment> batch,
                            const LossConfig& config);

/// Pair list materialized from a dense batch in the order dense_batch_loss
/// visits it.
PreferenceDataset materialize_batch_pairs(std::span<const ScoredSegment> batch);

/// Dispatches on config.variant. `logits` are unnormalized; the log-policy is
/// their row log-softmax.
LossOutput evaluate_objective(const Table& logits, const TrainingData& data,
                              const LossConfig& config);

/// Boltzmann MLE loss on an unconstrained advantage table: per-step terms are
/// A(s, a) with no temperature and no normalization. Uses gamma, label_mode
/// and reduction from config.
LossOutput naive_advantage_loss(const Table& advantage, const PreferenceDataset& dataset,
                                const LossConfig& config);

/// -mean log pi(a|s) and its logit gradient.
LossOutput behavior_cloning_loss(const Table& log_policy, std::span<const StateAction> data);

/// Pulls a gradient with respect to log pi back through the row softmax.
Table log_policy_grad_to_logits(const Table& grad_log_policy, const Table& log_policy);

}  // namespace cpl
