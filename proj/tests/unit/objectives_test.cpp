// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/error.hpp"
#include "cpl/objectives.hpp"
#include "cpl/trainer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace cpl {
namespace {

using testing::make_pair;
using testing::random_dataset;
using testing::random_table;

double brute_softplus(double x) { return std::log(1.0 + std::exp(x)); }

TEST(PairLoss, MatchesDirectFormula) {
  for (double a : {0.1, 1.0})
    for (double lam : {0.5, 1.0}) {
      const double sp = -1.3, sm = -2.1;
      EXPECT_NEAR(pair_loss(sp, sm, a, lam), brute_softplus(-a * (sp - lam * sm)), 1e-14);
    }
  EXPECT_NEAR(pair_loss(0.0, 0.0, 1.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(pair_loss(-1e4, 0.0, 1.0, 1.0)));
  EXPECT_NEAR(pair_loss(-1e4, 0.0, 1.0, 1.0), 1e4, 1e-6);
}

TEST(SegmentScore, DiscountedSum) {
  Table lp(2, 2);
  lp(0, 0) = std::log(0.25);
  lp(0, 1) = std::log(0.75);
  lp(1, 0) = std::log(0.5);
  lp(1, 1) = std::log(0.5);
  const Segment seg = testing::make_segment({{0, 0}, {1, 1}, {0, 1}});
  const double expected = 0.2 * (std::log(0.25) + 0.9 * std::log(0.5) + 0.81 * std::log(0.75));
  EXPECT_NEAR(segment_log_prob_score(lp, seg, 0.2, 0.9), expected, 1e-15);
}

TEST(NormalizedPolicy, ContractEnforced) {
  Table bad(1, 2, 0.0);
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  LossConfig cfg;
  cfg.variant = LossVariant::vanilla;
  EXPECT_THROW(require_normalized_log_policy(bad), ContractError);
  EXPECT_THROW(cpl_loss(bad, ds, cfg), ContractError);
  EXPECT_NO_THROW(require_normalized_log_policy(row_log_softmax(bad)));
}

TEST(CplLoss, UniformPolicyGivesLog2) {
  Rng rng(1);
  const auto ds = random_dataset(3, 4, 10, 3, rng);
  LossConfig cfg;
  cfg.variant = LossVariant::vanilla;
  const Table lp = row_log_softmax(Table(3, 4, 0.0));
  const auto out = cpl_loss(lp, ds, cfg);
  EXPECT_NEAR(out.loss, std::log(2.0), 1e-14);
  cfg.reduction = Reduction::sum;
  EXPECT_NEAR(cpl_loss(lp, ds, cfg).loss, 10 * std::log(2.0), 1e-12);
}

TEST(CplLoss, SoftLabelsOnSymmetricPair) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}, 0.3, LabelMode::soft));
  LossConfig cfg;
  cfg.variant = LossVariant::vanilla;
  cfg.label_mode = TrainLabelMode::soft;
  cfg.alpha = 1.0;
  Table logits(1, 2);
  logits(0, 0) = 0.4;
  const Table lp = row_log_softmax(logits);
  const double z = lp(0, 0) - lp(0, 1);
  const double expected = 0.3 * brute_softplus(-z) + 0.7 * brute_softplus(z);
  EXPECT_NEAR(cpl_loss(lp, ds, cfg).loss, expected, 1e-14);
}

TEST(CplLoss, LambdaOneEqualsVanilla) {
  Rng rng(2);
  const auto ds = random_dataset(4, 3, 12, 4, rng);
  const Table lp = row_log_softmax(random_table(4, 3, rng, 2.0));
  LossConfig cfg;
  cfg.variant = LossVariant::biased;
  cfg.lambda = 1.0;
  cfg.gamma = 0.95;
  const auto a = cpl_lambda_loss(lp, ds, cfg);
  const auto b = cpl_loss(lp, ds, cfg);
  EXPECT_NEAR(a.loss, b.loss, 1e-15);
  for (std::size_t i = 0; i < a.grad.size(); ++i) EXPECT_NEAR(a.grad.flat()[i], b.grad.flat()[i], 1e-15);
  cfg.lambda = 0.0;
  EXPECT_THROW(cpl_lambda_loss(lp, ds, cfg), ParameterError);
  cfg.lambda = 1.5;
  EXPECT_THROW(cpl_lambda_loss(lp, ds, cfg), ParameterError);
}

TEST(CplLoss, Accuracy) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  ds.pairs.push_back(make_pair({{0, 1}}, {{0, 0}}));
  Table logits(1, 2);
  logits(0, 0) = 1.0;
  LossConfig cfg;
  cfg.variant = LossVariant::vanilla;
  EXPECT_DOUBLE_EQ(cpl_loss(row_log_softmax(logits), ds, cfg).accuracy, 0.5);
}

TEST(KlLoss, UniformReferenceMatchesBiased) {
  // Against a uniform reference, each step adds the same constant to both
  // segments; with lambda = 1 and equal lengths it cancels.
  Rng rng(3);
  const auto ds = random_dataset(3, 3, 8, 2, rng);
  const Table lp = row_log_softmax(random_table(3, 3, rng));
  LossConfig cfg;
  cfg.variant = LossVariant::kl_biased;
  cfg.lambda = 1.0;
  cfg.reference_log_policy = row_log_softmax(Table(3, 3, 0.0));
  const auto kl = cpl_kl_loss(lp, ds, cfg);
  const auto plain = cpl_loss(lp, ds, cfg);
  EXPECT_NEAR(kl.loss, plain.loss, 1e-14);
  cfg.reference_log_policy = Table(3, 3, 0.0);
  EXPECT_THROW(cpl_kl_loss(lp, ds, cfg), ContractError);
  cfg.reference_log_policy = row_log_softmax(Table(2, 3, 0.0));
  EXPECT_THROW(cpl_kl_loss(lp, ds, cfg), ParameterError);
}

TEST(BcLoss, MeanNegativeLogLikelihood) {
  Table logits(2, 2);
  logits(0, 1) = 1.0;
  const Table lp = row_log_softmax(logits);
  const std::vector<StateAction> data = {{0, 1}, {1, 0}};
  const auto out = behavior_cloning_loss(lp, data);
  EXPECT_NEAR(out.loss, -(lp(0, 1) + lp(1, 0)) / 2, 1e-15);
  EXPECT_THROW(behavior_cloning_loss(lp, {}), ParameterError);
}

TEST(BcRegularized, AddsWeightedBc) {
  Rng rng(4);
  const auto ds = random_dataset(3, 2, 6, 2, rng);
  const Table lp = row_log_softmax(random_table(3, 2, rng));
  const std::vector<StateAction> data = {{0, 0}, {2, 1}};
  LossConfig cfg;
  cfg.variant = LossVariant::bc_reg;
  cfg.beta = 0.25;
  const auto out = cpl_bc_loss(lp, ds, cfg, data);
  EXPECT_NEAR(out.loss, cpl_loss(lp, ds, cfg).loss + 0.25 * behavior_cloning_loss(lp, data).loss, 1e-14);
}

TEST(RankingLoss, PairGroupsReduceToVanilla) {
  Rng rng(5);
  const auto ds = random_dataset(4, 3, 10, 3, rng);
  std::vector<RankingGroup> groups;
  for (const auto& p : ds.pairs) groups.push_back({{p.plus, p.minus}});
  const Table lp = row_log_softmax(random_table(4, 3, rng, 2.0));
  LossConfig cfg;
  cfg.variant = LossVariant::ranking;
  cfg.gamma = 0.9;
  const auto r = cpl_ranking_loss(lp, groups, cfg);
  const auto v = cpl_loss(lp, ds, cfg);
  EXPECT_NEAR(r.loss, v.loss, 1e-13);
  for (std::size_t i = 0; i < r.grad.size(); ++i) EXPECT_NEAR(r.grad.flat()[i], v.grad.flat()[i], 1e-13);
}

TEST(RankingLoss, ThreeWayClosedForm) {
  Table logits(1, 3);
  logits(0, 0) = 0.5;
  logits(0, 1) = -0.2;
  const Table lp = row_log_softmax(logits);
  LossConfig cfg;
  cfg.variant = LossVariant::ranking;
  cfg.alpha = 1.0;
  std::vector<RankingGroup> g = {{{testing::make_segment({{0, 0}}), testing::make_segment({{0, 1}}),
                                   testing::make_segment({{0, 2}})}}};
  const double s0 = lp(0, 0), s1 = lp(0, 1), s2 = lp(0, 2);
  const double expected = -std::log(std::exp(s0) / (std::exp(s0) + std::exp(s1) + std::exp(s2))) -
                          std::log(std::exp(s1) / (std::exp(s1) + std::exp(s2)));
  EXPECT_NEAR(cpl_ranking_loss(lp, g, cfg).loss, expected, 1e-14);
  std::vector<RankingGroup> single = {{{testing::make_segment({{0, 0}})}}};
  EXPECT_THROW(cpl_ranking_loss(lp, single, cfg), ParameterError);
}

TEST(DenseBatch, MaterializedPairsAndTies) {
  std::vector<ScoredSegment> batch = {{testing::make_segment({{0, 0}}), 1.0},
                                      {testing::make_segment({{0, 1}}), 3.0},
                                      {testing::make_segment({{0, 2}}), 1.0}};
  const auto ds = materialize_batch_pairs(batch);
  ASSERT_EQ(ds.pairs.size(), 3u);
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (const auto& p : ds.pairs) got.emplace_back(p.plus.steps[0].action, p.minus.steps[0].action);
  EXPECT_NE(std::find(got.begin(), got.end(), std::make_pair<std::size_t, std::size_t>(1, 0)), got.end());
  EXPECT_NE(std::find(got.begin(), got.end(), std::make_pair<std::size_t, std::size_t>(1, 2)), got.end());
  EXPECT_NE(std::find(got.begin(), got.end(), std::make_pair<std::size_t, std::size_t>(0, 2)), got.end());

  Rng rng(6);
  Table lp = row_log_softmax(random_table(1, 3, rng));
  LossConfig cfg;
  cfg.variant = LossVariant::dense_batch;
  cfg.lambda = 0.75;
  cfg.reduction = Reduction::sum;
  EXPECT_NEAR(dense_batch_loss(lp, batch, cfg).loss, cpl_lambda_loss(lp, ds, cfg).loss, 1e-14);
  EXPECT_THROW(dense_batch_loss(lp, std::span(batch).first(1), cfg), ParameterError);
}

TEST(NaiveLoss, NoTemperatureNoNormalization) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  Table adv(1, 2);
  adv(0, 0) = 3.0;
  adv(0, 1) = 1.0;
  LossConfig cfg;
  cfg.alpha = 0.1;
  const auto out = naive_advantage_loss(adv, ds, cfg);
  EXPECT_NEAR(out.loss, brute_softplus(-2.0), 1e-14);
  EXPECT_NEAR(out.grad(0, 0), -1.0 / (1.0 + std::exp(2.0)), 1e-14);
  EXPECT_NEAR(out.grad(0, 1), 1.0 / (1.0 + std::exp(2.0)), 1e-14);
}

TEST(LossConfigValidate, Requirements) {
  LossConfig cfg;
  cfg.variant = LossVariant::bc_reg;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg.beta = 0.1;
  EXPECT_NO_THROW(cfg.validate());
  cfg.variant = LossVariant::kl_biased;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg.variant = LossVariant::vanilla;
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_EQ(parse_loss_variant("dense_batch"), LossVariant::dense_batch);
  EXPECT_THROW(parse_loss_variant("other"), ParameterError);
}

TEST(LogitChainRule, MatchesFiniteDifferences) {
  Rng rng(7);
  const Table logits = random_table(3, 4, rng);
  const Table g = random_table(3, 4, rng);
  const Table lp = row_log_softmax(logits);
  const Table pulled = log_policy_grad_to_logits(g, lp);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Table up = logits, dn = logits;
    up.flat()[i] += h;
    dn.flat()[i] -= h;
    const Table lu = row_log_softmax(up), ld = row_log_softmax(dn);
    double fd = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) fd += g.flat()[j] * (lu.flat()[j] - ld.flat()[j]);
    EXPECT_NEAR(pulled.flat()[i], fd / (2 * h), 1e-8);
  }
}

TEST(Reductions, ZeroBetaAndTwoSegmentBatch) {
  Rng rng(8);
  const auto ds = random_dataset(3, 3, 6, 2, rng);
  const Table lp = row_log_softmax(random_table(3, 3, rng));
  LossConfig cfg;
  cfg.beta = 0.0;
  const std::vector<StateAction> data = {{0, 0}};
  EXPECT_NEAR(cpl_bc_loss(lp, ds, cfg, data).loss, cpl_loss(lp, ds, cfg).loss, 1e-15);

  cfg.lambda = 0.6;
  cfg.reduction = Reduction::sum;
  const std::vector<ScoredSegment> batch = {{ds.pairs[0].minus, 0.0}, {ds.pairs[0].plus, 1.0}};
  PreferenceDataset one;
  one.pairs.push_back(ds.pairs[0]);
  EXPECT_NEAR(dense_batch_loss(lp, batch, cfg).loss, cpl_lambda_loss(lp, one, cfg).loss, 1e-15);
}

TEST(BcRegularized, LargeBetaFollowsBcGradient) {
  Rng rng(9);
  const auto ds = random_dataset(3, 3, 6, 2, rng);
  const Table lp = row_log_softmax(random_table(3, 3, rng));
  const std::vector<StateAction> data = {{0, 0}, {1, 2}, {2, 1}};
  LossConfig cfg;
  cfg.beta = 1e6;
  const Table g = cpl_bc_loss(lp, ds, cfg, data).grad;
  const Table b = behavior_cloning_loss(lp, data).grad;
  double dot = 0.0, ng = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dot += g.flat()[i] * b.flat()[i];
    ng += g.flat()[i] * g.flat()[i];
    nb += b.flat()[i] * b.flat()[i];
  }
  EXPECT_GT(dot / std::sqrt(ng * nb), 0.999);
}

TEST(KlLoss, PermutingReferenceChangesLoss) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  Table ref_logits(1, 3);
  ref_logits(0, 0) = 1.0;
  ref_logits(0, 1) = -0.5;
  Table swapped = ref_logits;
  std::swap(swapped(0, 0), swapped(0, 1));
  const Table lp = row_log_softmax(Table(1, 3, 0.0));
  LossConfig cfg;
  cfg.variant = LossVariant::kl_biased;
  cfg.lambda = 1.0;
  cfg.reference_log_policy = row_log_softmax(ref_logits);
  const double a = cpl_kl_loss(lp, ds, cfg).loss;
  cfg.reference_log_policy = row_log_softmax(swapped);
  EXPECT_GT(std::abs(a - cpl_kl_loss(lp, ds, cfg).loss), 1e-3);
}

}  // namespace
}  // namespace cpl
