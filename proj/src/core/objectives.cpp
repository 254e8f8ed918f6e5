// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/objectives.hpp"

#include "cpl/error.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace cpl {

std::string_view to_string(LossVariant v) noexcept {
  switch (v) {
    case LossVariant::vanilla: return "vanilla";
    case LossVariant::biased: return "biased";
    case LossVariant::bc_reg: return "bc_reg";
    case LossVariant::kl_biased: return "kl_biased";
    case LossVariant::ranking: return "ranking";
    case LossVariant::dense_batch: return "dense_batch";
  }
  return "vanilla";
}

LossVariant parse_loss_variant(std::string_view s) {
  if (s == "vanilla") return LossVariant::vanilla;
  if (s == "biased") return LossVariant::biased;
  if (s == "bc_reg") return LossVariant::bc_reg;
  if (s == "kl_biased") return LossVariant::kl_biased;
  if (s == "ranking") return LossVariant::ranking;
  if (s == "dense_batch") return LossVariant::dense_batch;
  throw ParameterError("unknown loss variant '" + std::string(s) + "'");
}

std::string_view to_string(TrainLabelMode m) noexcept {
  return m == TrainLabelMode::hard ? "hard" : "soft";
}

TrainLabelMode parse_train_label_mode(std::string_view s) {
  if (s == "hard") return TrainLabelMode::hard;
  if (s == "soft") return TrainLabelMode::soft;
  throw ParameterError("unknown training label mode '" + std::string(s) + "'");
}

std::string_view to_string(Reduction r) noexcept { return r == Reduction::mean ? "mean" : "sum"; }

Reduction parse_reduction(std::string_view s) {
  if (s == "mean") return Reduction::mean;
  if (s == "sum") return Reduction::sum;
  throw ParameterError("unknown reduction '" + std::string(s) + "'");
}

namespace {

void check_alpha_gamma(const LossConfig& config) {
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha))
    throw ParameterError("loss alpha must be positive");
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0))
    throw ParameterError("loss gamma must lie in [0, 1]");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in (0, 1]");
}

/// Per-step value alpha * (base(s, a) - reference(s, a)).
struct StepValues {
  const Table& base;
  const Table* reference;
  double scale;

  double at(const StateAction& step) const {
    const double ref = reference ? (*reference)(step.state, step.action) : 0.0;
    return scale * (base(step.state, step.action) - ref);
  }
};

void check_segment(const Segment& seg, const Table& table) {
  if (seg.steps.empty()) throw ParameterError("empty segment");
  for (const auto& step : seg.steps)
    if (step.state >= table.rows() || step.action >= table.cols())
      throw ParameterError("segment step out of range for the policy table");
}

double segment_value(const StepValues& values, const Segment& seg, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (const auto& step : seg.steps) {
    total += weight * values.at(step);
    weight *= gamma;
  }
  return total;
}

/// grad(s_t, a_t) += coeff * scale * gamma^t.
void accumulate_segment(Table& grad, const StepValues& values, const Segment& seg, double gamma,
                        double coeff) {
  double weight = coeff * values.scale;
  for (const auto& step : seg.steps) {
    grad(step.state, step.action) += weight;
    weight *= gamma;
  }
}

/// Pairwise logistic objective; gradient is with respect to values.base.
LossOutput pair_objective(const StepValues& values, std::span<const PreferencePair> pairs,
                          double lambda, double gamma, TrainLabelMode mode, Reduction reduction) {
  if (pairs.empty()) throw ParameterError("preference dataset has no pairs");
  LossOutput out;
  out.grad = Table(values.base.rows(), values.base.cols());
  const double weight = reduction == Reduction::mean ? 1.0 / static_cast<double>(pairs.size()) : 1.0;
  double total = 0.0;
  std::size_t correct = 0;
  for (const auto& pair : pairs) {
    check_segment(pair.plus, values.base);
    check_segment(pair.minus, values.base);
    const double sp = segment_value(values, pair.plus, gamma);
    const double sm = segment_value(values, pair.minus, gamma);
    const double z = sp - lambda * sm;
    double loss = 0.0;
    double dz = 0.0;
    if (mode == TrainLabelMode::hard) {
      loss = softplus(-z);
      dz = logistic(z) - 1.0;
      if (sp > sm) ++correct;
    } else {
      const double p = pair.label_prob;
      loss = p * softplus(-z) + (1.0 - p) * softplus(z);
      dz = logistic(z) - p;
      if (p == 0.5 || (sp - sm) * (p - 0.5) > 0.0) ++correct;
    }
    total += weight * loss;
    accumulate_segment(out.grad, values, pair.plus, gamma, weight * dz);
    accumulate_segment(out.grad, values, pair.minus, gamma, -weight * dz * lambda);
  }
  out.loss = total;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
  if (!std::isfinite(out.loss)) throw TrainingError("loss is not finite");
  return out;
}

void require_matching_shape(const Table& a, const Table& b, const char* what) {
  if (!a.same_shape(b)) throw ParameterError(std::string(what) + ": shape mismatch");
}

}  // namespace

void LossConfig::validate() const {
  check_alpha_gamma(*this);
  check_lambda(lambda);
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be non-negative");
  if (variant == LossVariant::bc_reg && !(beta > 0.0))
    throw ParameterError("bc_reg variant requires beta > 0");
  if (variant == LossVariant::kl_biased && !reference_log_policy)
    throw ParameterError("kl_biased variant requires a reference log-policy");
}

void require_normalized_log_policy(const Table& log_policy) {
  for (std::size_t s = 0; s < log_policy.rows(); ++s) {
    double total = 0.0;
    for (double lp : log_policy.row(s)) total += std::exp(lp);
    if (!(std::abs(total - 1.0) <= 1e-8)) {
      std::ostringstream msg;
      msg << "log-policy row " << s << " is not normalized (sum exp = " << total << ")";
      throw ContractError(msg.str());
    }
  }
}

double segment_log_prob_score(const Table& log_policy, const Segment& segment, double alpha,
                              double gamma) {
  require_normalized_log_policy(log_policy);
  check_segment(segment, log_policy);
  return segment_value(StepValues{log_policy, nullptr, alpha}, segment, gamma);
}

double pair_loss(double loglik_plus, double loglik_minus, double alpha, double lambda) noexcept {
  return softplus(-alpha * (loglik_plus - lambda * loglik_minus));
}

Table log_policy_grad_to_logits(const Table& grad_log_policy, const Table& log_policy) {
  require_matching_shape(grad_log_policy, log_policy, "log_policy_grad_to_logits");
  Table out(grad_log_policy.rows(), grad_log_policy.cols());
  for (std::size_t s = 0; s < out.rows(); ++s) {
    double row_total = 0.0;
    for (double g : grad_log_policy.row(s)) row_total += g;
    for (std::size_t a = 0; a < out.cols(); ++a)
      out(s, a) = grad_log_policy(s, a) - std::exp(log_policy(s, a)) * row_total;
  }
  return out;
}

LossOutput cpl_loss(const Table& log_policy, const PreferenceDataset& dataset,
                    const LossConfig& config) {
  check_alpha_gamma(config);
  require_normalized_log_policy(log_policy);
  LossOutput out = pair_objective(StepValues{log_policy, nullptr, config.alpha}, dataset.pairs, 1.0,
                                  config.gamma, config.label_mode, config.reduction);
  out.grad = log_policy_grad_to_logits(out.grad, log_policy);
  return out;
}

LossOutput cpl_lambda_loss(const Table& log_policy, const PreferenceDataset& dataset,
                           const LossConfig& config) {
  check_alpha_gamma(config);
  check_lambda(config.lambda);
  require_normalized_log_policy(log_policy);
  LossOutput out = pair_objective(StepValues{log_policy, nullptr, config.alpha}, dataset.pairs,
                                  config.lambda, config.gamma, config.label_mode, config.reduction);
  out.grad = log_policy_grad_to_logits(out.grad, log_policy);
  return out;
}

LossOutput behavior_cloning_loss(const Table& log_policy, std::span<const StateAction> data) {
  if (data.empty()) throw ParameterError("behavior cloning data is empty");
  LossOutput out;
  Table grad(log_policy.rows(), log_policy.cols());
  const double w = 1.0 / static_cast<double>(data.size());
  double total = 0.0;
  for (const auto& sa : data) {
    if (sa.state >= log_policy.rows() || sa.action >= log_policy.cols())
      throw ParameterError("behavior cloning pair out of range");
    total -= w * log_policy(sa.state, sa.action);
    grad(sa.state, sa.action) -= w;
  }
  out.loss = total;
  out.grad = log_policy_grad_to_logits(grad, log_policy);
  out.accuracy = 0.0;
  return out;
}

LossOutput cpl_bc_loss(const Table& log_policy, const PreferenceDataset& dataset,
                       const LossConfig& config, std::span<const StateAction> bc_data) {
  if (!(config.beta >= 0.0)) throw ParameterError("beta must be non-negative");
  if (config.beta > 0.0 && bc_data.empty())
    throw ParameterError("cpl_bc_loss: beta > 0 requires behavior cloning data");
  LossOutput out = cpl_loss(log_policy, dataset, config);
  if (config.beta == 0.0) return out;
  const LossOutput bc = behavior_cloning_loss(log_policy, bc_data);
  out.loss += config.beta * bc.loss;
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.flat()[i] += config.beta * bc.grad.flat()[i];
  return out;
}

LossOutput cpl_kl_loss(const Table& log_policy, const PreferenceDataset& dataset,
                       const LossConfig& config) {
  check_alpha_gamma(config);
  check_lambda(config.lambda);
  if (!config.reference_log_policy)
    throw ParameterError("cpl_kl_loss: reference log-policy is missing");
  const Table& reference = *config.reference_log_policy;
  require_matching_shape(reference, log_policy, "cpl_kl_loss");
  require_normalized_log_policy(log_policy);
  require_normalized_log_policy(reference);
  LossOutput out = pair_objective(StepValues{log_policy, &reference, config.alpha}, dataset.pairs,
                                  config.lambda, config.gamma, config.label_mode, config.reduction);
  out.grad = log_policy_grad_to_logits(out.grad, log_policy);
  return out;
}

LossOutput cpl_ranking_loss(const Table& log_policy, std::span<const RankingGroup> rankings,
                            const LossConfig& config) {
  check_alpha_gamma(config);
  require_normalized_log_policy(log_policy);
  if (rankings.empty()) throw ParameterError("ranking dataset has no groups");
  const StepValues values{log_policy, nullptr, config.alpha};
  Table grad(log_policy.rows(), log_policy.cols());
  const double weight =
      config.reduction == Reduction::mean ? 1.0 / static_cast<double>(rankings.size()) : 1.0;
  double total = 0.0;
  std::size_t correct = 0;
  std::size_t adjacent = 0;
  std::vector<double> scores;
  std::vector<double> suffix_lse;
  std::vector<double> dscore;
  for (const auto& group : rankings) {
    const std::size_t K = group.segments.size();
    if (K < 2) throw ParameterError("ranking groups need at least 2 segments");
    scores.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      check_segment(group.segments[k], log_policy);
      scores[k] = segment_value(values, group.segments[k], config.gamma);
    }
    // suffix_lse[k] = log sum_{j >= k} exp(scores[j])
    suffix_lse.assign(K, 0.0);
    suffix_lse[K - 1] = scores[K - 1];
    for (std::size_t k = K - 1; k-- > 0;) {
      const double hi = std::max(scores[k], suffix_lse[k + 1]);
      suffix_lse[k] = hi + std::log(std::exp(scores[k] - hi) + std::exp(suffix_lse[k + 1] - hi));
    }
    double group_loss = 0.0;
    for (std::size_t k = 0; k < K; ++k) group_loss += suffix_lse[k] - scores[k];
    // d/d score_j = -1 + sum_{k <= j} exp(score_j - suffix_lse[k])
    dscore.assign(K, -1.0);
    for (std::size_t j = 0; j < K; ++j)
      for (std::size_t k = 0; k <= j; ++k) dscore[j] += std::exp(scores[j] - suffix_lse[k]);
    total += weight * group_loss;
    for (std::size_t j = 0; j < K; ++j)
      accumulate_segment(grad, values, group.segments[j], config.gamma, weight * dscore[j]);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      ++adjacent;
      if (scores[k] > scores[k + 1]) ++correct;
    }
  }
  LossOutput out;
  out.loss = total;
  if (!std::isfinite(out.loss)) throw TrainingError("loss is not finite");
  out.grad = log_policy_grad_to_logits(grad, log_policy);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(adjacent);
  return out;
}

PreferenceDataset materialize_batch_pairs(std::span<const ScoredSegment> batch) {
  PreferenceDataset ds;
  const std::size_t b = batch.size();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      const bool above = batch[i].score > batch[j].score ||
                         (batch[i].score == batch[j].score && i < j);
      if (!above) continue;
      PreferencePair pair;
      pair.plus = batch[i].segment;
      pair.minus = batch[j].segment;
      pair.label_prob = 1.0;
      pair.mode = LabelMode::argmax;
      ds.pairs.push_back(std::move(pair));
    }
  return ds;
}

LossOutput dense_batch_loss(const Table& log_policy, std::span<const ScoredSegment> batch,
                            const LossConfig& config) {
  check_alpha_gamma(config);
  check_lambda(config.lambda);
  require_normalized_log_policy(log_policy);
  if (batch.size() < 2) throw ParameterError("dense batch needs at least 2 segments");
  const PreferenceDataset pairs = materialize_batch_pairs(batch);
  LossOutput out = pair_objective(StepValues{log_policy, nullptr, config.alpha}, pairs.pairs,
                                  config.lambda, config.gamma, TrainLabelMode::hard, Reduction::sum);
  out.grad = log_policy_grad_to_logits(out.grad, log_policy);
  return out;
}

LossOutput evaluate_objective(const Table& logits, const TrainingData& data,
                              const LossConfig& config) {
  const Table log_policy = row_log_softmax(logits);
  switch (config.variant) {
    case LossVariant::vanilla: return cpl_loss(log_policy, data.preferences, config);
    case LossVariant::biased: return cpl_lambda_loss(log_policy, data.preferences, config);
    case LossVariant::bc_reg: return cpl_bc_loss(log_policy, data.preferences, config, data.bc_data);
    case LossVariant::kl_biased: return cpl_kl_loss(log_policy, data.preferences, config);
    case LossVariant::ranking: return cpl_ranking_loss(log_policy, data.preferences.rankings, config);
    case LossVariant::dense_batch: return dense_batch_loss(log_policy, data.batch, config);
  }
  throw ParameterError("unknown loss variant");
}

LossOutput naive_advantage_loss(const Table& advantage, const PreferenceDataset& dataset,
                                const LossConfig& config) {
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0))
    throw ParameterError("loss gamma must lie in [0, 1]");
  return pair_objective(StepValues{advantage, nullptr, 1.0}, dataset.pairs, 1.0, config.gamma,
                        config.label_mode, config.reduction);
}

}  // namespace cpl
