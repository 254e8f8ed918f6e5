// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/error.hpp"
#include "cpl/oracle.hpp"
#include "cpl/trainer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace cpl {
namespace {

using testing::make_pair;
using testing::random_dataset;
using testing::random_table;

struct DenseInstance {
  TabularMDP mdp;
  SoftSolution sol;
  TrainingData data;
};

DenseInstance dense_instance(std::uint64_t seed) {
  DenseInstance inst{build_random_mdp(5, 3, 0.9, seed), {}, {}};
  inst.sol = soft_value_iteration(inst.mdp, 0.1);
  const SegmentScorer scorer(PreferenceModel::regret, inst.mdp, inst.sol, 0.9);
  const auto segs = exhaustive_unit_segments(5, 3);
  Rng rng(seed);
  inst.data.preferences = build_dense_dataset(segs, scorer, LabelMode::soft, rng);
  return inst;
}

LossConfig soft_vanilla() {
  LossConfig cfg;
  cfg.variant = LossVariant::vanilla;
  cfg.label_mode = TrainLabelMode::soft;
  cfg.alpha = 0.1;
  return cfg;
}

TEST(Minimize, QuadraticConverges) {
  for (auto method : {OptimizerMethod::gradient_descent, OptimizerMethod::momentum,
                      OptimizerMethod::adaptive_moment}) {
    Table x(1, 2, 3.0);
    OptimizerConfig cfg;
    cfg.method = method;
    cfg.learning_rate = method == OptimizerMethod::adaptive_moment ? 0.05 : 0.1;
    cfg.steps = 20000;
    cfg.convergence_tol = 1e-9;
    const auto trace = minimize(
        x,
        [](const Table& p, std::size_t) {
          LossOutput out;
          out.grad = p;
          for (double v : p.flat()) out.loss += 0.5 * v * v;
          return out;
        },
        cfg);
    EXPECT_TRUE(trace.converged) << to_string(method);
    EXPECT_LT(std::abs(x(0, 0)), 1e-8);
    EXPECT_EQ(trace.records.back().step, trace.steps_taken);
  }
}

TEST(Minimize, DivergenceIsReported) {
  Table x(1, 1, 1.0);
  OptimizerConfig cfg;
  cfg.method = OptimizerMethod::gradient_descent;
  cfg.learning_rate = 10.0;
  cfg.steps = 1000;
  EXPECT_THROW(minimize(
                   x,
                   [](const Table& p, std::size_t) {
                     LossOutput out;
                     out.loss = std::exp(p(0, 0) * p(0, 0));
                     out.grad = Table(1, 1, 2 * p(0, 0) * out.loss);
                     return out;
                   },
                   cfg),
               TrainingError);
}

TEST(OptimizerConfig, Validation) {
  OptimizerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_EQ(parse_optimizer_method("momentum"), OptimizerMethod::momentum);
  EXPECT_THROW(parse_optimizer_method("lbfgs"), ParameterError);
}

TEST(Train, RecoversOptimalPolicyFromDenseSoftLabels) {
  const auto inst = dense_instance(21);
  OptimizerConfig opt;
  opt.steps = 20000;
  opt.convergence_tol = 1e-10;
  const EvalTarget eval{&inst.mdp, &inst.sol, 0, false};
  const auto result = train(zero_logits(5, 3), inst.data, soft_vanilla(), opt, eval);
  ASSERT_TRUE(result.trace.records.back().kl_to_optimal.has_value());
  EXPECT_LT(*result.trace.records.back().kl_to_optimal, 1e-3);
  const Table pi = result.policy.policy();
  for (std::size_t s = 0; s < 5; ++s) {
    double total = 0.0;
    for (double p : pi.row(s)) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Train, StationaryStartLeavesLogitsUnchanged) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}, 0.5, LabelMode::soft));
  ds.pairs.push_back(make_pair({{1, 1}}, {{1, 0}}, 0.5, LabelMode::soft));
  TrainingData data{ds, {}, {}};
  OptimizerConfig opt;
  opt.steps = 100;
  const auto result = train(zero_logits(2, 2), data, soft_vanilla(), opt);
  for (double x : result.policy.logits.flat()) EXPECT_EQ(x, 0.0);
  EXPECT_TRUE(result.trace.converged);
  EXPECT_EQ(result.trace.steps_taken, 0u);
}

TEST(Train, DeterministicAcrossRuns) {
  Rng rng(5);
  TrainingData data{random_dataset(4, 3, 30, 3, rng), {}, {}};
  LossConfig loss;
  loss.variant = LossVariant::biased;
  OptimizerConfig opt;
  opt.steps = 300;
  opt.batch_size = 8;
  opt.seed = 99;
  const auto a = train(zero_logits(4, 3), data, loss, opt);
  const auto b = train(zero_logits(4, 3), data, loss, opt);
  EXPECT_EQ(a.policy.logits, b.policy.logits);
  opt.seed = 100;
  const auto c = train(zero_logits(4, 3), data, loss, opt);
  EXPECT_NE(a.policy.logits, c.policy.logits);
}

TEST(Train, GradientDescentBelowInverseSmoothnessIsMonotone) {
  const auto inst = dense_instance(22);
  const LossConfig loss = soft_vanilla();
  const auto objective = [&](const Table& x) { return evaluate_objective(x, inst.data, loss); };
  const double L = estimate_smoothness(objective, Table(5, 3, 0.0), 50, 3.0, 1);
  ASSERT_GT(L, 0.0);
  OptimizerConfig opt;
  opt.method = OptimizerMethod::gradient_descent;
  opt.learning_rate = 0.5 / L;
  opt.steps = 2000;
  const auto result = train(zero_logits(5, 3), inst.data, loss, opt);
  const auto& rec = result.trace.records;
  for (std::size_t i = 1; i < rec.size(); ++i) EXPECT_LE(rec[i].loss, rec[i - 1].loss + 1e-15);
}

TEST(Train, EvaluationCadence) {
  const auto inst = dense_instance(23);
  OptimizerConfig opt;
  opt.steps = 50;
  opt.convergence_tol = 0.0;
  const EvalTarget eval{&inst.mdp, &inst.sol, 10, true};
  const auto result = train(zero_logits(5, 3), inst.data, soft_vanilla(), opt, eval);
  ASSERT_EQ(result.trace.records.size(), 51u);
  for (const auto& r : result.trace.records)
    EXPECT_EQ(r.kl_to_optimal.has_value(), r.step % 10 == 0) << r.step;
  std::ostringstream csv;
  result.trace.write_csv(csv);
  std::string header;
  std::getline(std::istringstream(csv.str()) >> std::ws, header);
  EXPECT_EQ(header, "step,loss,grad_norm,accuracy,kl_to_optimal,policy_return");
}

TEST(Train, PretrainingMovesTowardData) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 1}}, {{0, 1}}, 0.5, LabelMode::soft));
  TrainingData data{ds, {}, {{0, 0}, {0, 0}, {0, 1}}};
  OptimizerConfig opt;
  opt.steps = 1;
  opt.pretrain_steps = 3000;
  opt.learning_rate = 0.05;
  opt.convergence_tol = 1e-6;
  const auto result = train(zero_logits(1, 2), data, soft_vanilla(), opt);
  EXPECT_NEAR(result.policy.policy()(0, 0), 2.0 / 3.0, 1e-3);
}

TEST(BcPretrain, MatchesEmpiricalFrequencies) {
  const std::vector<StateAction> data = {{0, 0}, {0, 2}, {0, 2}, {0, 2}, {1, 1}};
  OptimizerConfig opt;
  opt.steps = 20000;
  opt.learning_rate = 0.05;
  opt.convergence_tol = 1e-7;
  const auto result = bc_pretrain(zero_logits(2, 3), data, opt);
  const Table pi = result.policy.policy();
  EXPECT_NEAR(pi(0, 2), 0.75, 1e-4);
  EXPECT_NEAR(pi(0, 0), 0.25, 1e-4);
  EXPECT_THROW(bc_pretrain(zero_logits(2, 3), {}, opt), ParameterError);
}

TEST(GradientCheck, AllVariants) {
  Rng rng(11);
  const auto ds = random_dataset(4, 3, 10, 3, rng);
  const Table logits = random_table(4, 3, rng);
  for (auto v : {LossVariant::vanilla, LossVariant::biased, LossVariant::bc_reg,
                 LossVariant::kl_biased}) {
    LossConfig cfg;
    cfg.variant = v;
    cfg.alpha = 0.5;
    cfg.gamma = 0.9;
    cfg.beta = 0.3;
    cfg.reference_log_policy = row_log_softmax(random_table(4, 3, rng));
    TrainingData data{ds, {}, {{0, 1}, {3, 2}}};
    EXPECT_LT(gradient_check(logits, data, cfg), 1e-5) << to_string(v);
  }
  EXPECT_THROW(gradient_check(Table(30, 20), [](const Table&) { return LossOutput{}; }),
               SizeError);
}

TEST(Train, BiasRegularizerStarvesUnseenAction) {
  // Conflicting labels between a1 and a2 on one state; a3 never appears.
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  ds.pairs.push_back(make_pair({{0, 1}}, {{0, 0}}));
  TrainingData data{ds, {}, {}};
  OptimizerConfig opt;
  opt.steps = 3000;
  LossConfig vanilla;
  vanilla.variant = LossVariant::vanilla;
  LossConfig biased;
  biased.variant = LossVariant::biased;
  biased.lambda = 0.5;
  const double ood_vanilla = train(zero_logits(1, 3), data, vanilla, opt).policy.policy()(0, 2);
  const double ood_biased = train(zero_logits(1, 3), data, biased, opt).policy.policy()(0, 2);
  EXPECT_GT(ood_vanilla, 0.3);
  EXPECT_LT(ood_biased, ood_vanilla);
}

TEST(KlToOptimal, ZeroAtOptimumPositiveElsewhere) {
  const TabularMDP m = build_random_mdp(3, 2, 0.9, 4);
  const SoftSolution sol = soft_value_iteration(m, 0.2);
  Table lp = sol.pi_star;
  for (double& x : lp.flat()) x = std::log(x);
  EXPECT_NEAR(kl_to_optimal(sol.pi_star, lp), 0.0, 1e-15);
  EXPECT_GT(kl_to_optimal(sol.pi_star, row_log_softmax(Table(3, 2, 0.0))), 0.0);
}

}  // namespace
}  // namespace cpl
