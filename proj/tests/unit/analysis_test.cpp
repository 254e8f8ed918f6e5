// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/analysis.hpp"
#include "cpl/error.hpp"
#include "cpl/objectives.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace cpl {
namespace {

using testing::make_pair;
using testing::random_dataset;
using testing::random_table;

PreferenceDataset partial_coverage() {
  // Action 2 never appears in either state.
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  ds.pairs.push_back(make_pair({{1, 1}}, {{1, 0}}));
  ds.pairs.push_back(make_pair({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}));
  return ds;
}

TEST(ComparisonMatrix, RowsAreDiscountedDifferences) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}, {1, 1}}, {{0, 0}, {0, 1}}, 0.8, LabelMode::soft));
  const auto X = comparison_matrix(ds, 2, 2, 0.5);
  ASSERT_EQ(X.rows.size(), 1u);
  // (0,0) cancels; +0.5 at (1,1), -0.5 at (0,1).
  ASSERT_EQ(X.rows[0].size(), 2u);
  EXPECT_EQ(X.rows[0][0].index, 1u);
  EXPECT_EQ(X.rows[0][0].value, -0.5);
  EXPECT_EQ(X.rows[0][1].index, 3u);
  EXPECT_EQ(X.rows[0][1].value, 0.5);
  EXPECT_EQ(X.soft_labels[0], 0.8);
  EXPECT_THROW(comparison_matrix(PreferenceDataset{}, 2, 2, 1.0), ParameterError);
  EXPECT_THROW(comparison_matrix(ds, 1, 2, 1.0), ParameterError);
}

TEST(MatrixLoss, AgreesWithObjective) {
  Rng rng(1);
  for (auto mode : {TrainLabelMode::hard, TrainLabelMode::soft}) {
    const auto ds = random_dataset(4, 3, 15, 3, rng);
    const Table lp = row_log_softmax(random_table(4, 3, rng, 2.0));
    LossConfig cfg;
    cfg.variant = LossVariant::vanilla;
    cfg.alpha = 0.3;
    cfg.gamma = 0.9;
    cfg.label_mode = mode;
    cfg.reduction = Reduction::sum;
    const auto direct = cpl_loss(lp, ds, cfg);
    const auto X = comparison_matrix(ds, 4, 3, 0.9);
    const auto viaX = matrix_loss(X, lp.flat(), 0.3, mode);
    EXPECT_NEAR(viaX.loss, direct.loss, 1e-12);
    Table g(4, 3);
    std::copy(viaX.grad.begin(), viaX.grad.end(), g.flat().begin());
    const Table pulled = log_policy_grad_to_logits(g, lp);
    for (std::size_t i = 0; i < pulled.size(); ++i)
      EXPECT_NEAR(pulled.flat()[i], direct.grad.flat()[i], 1e-12);
  }
}

TEST(Hessian, MatchesFiniteDifferenceOfGradient) {
  Rng rng(2);
  const auto ds = random_dataset(3, 2, 8, 2, rng);
  const auto X = comparison_matrix(ds, 3, 2, 1.0);
  std::vector<double> x(6);
  for (double& v : x) v = rng.uniform() - 2.0;
  const auto report = hessian_psd_check(X, x, 0.5);
  EXPECT_EQ(report.eigenvalues.size(), 6u);
  EXPECT_GE(report.min_eigenvalue, -1e-12);
  // Trace of the Hessian equals the sum of eigenvalues; compare against the
  // finite-difference diagonal.
  double trace = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < 6; ++i) {
    auto up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    trace += (matrix_loss(X, up, 0.5).grad[i] - matrix_loss(X, dn, 0.5).grad[i]) / (2 * h);
  }
  double sum = 0.0;
  for (double e : report.eigenvalues) sum += e;
  EXPECT_NEAR(sum, trace, 1e-6);
  EXPECT_LE(report.rank, std::min<std::size_t>(8, 6));
}

TEST(Hessian, SizeLimit) {
  PreferenceDataset ds;
  ds.pairs.push_back(make_pair({{0, 0}}, {{0, 1}}));
  const auto X = comparison_matrix(ds, 101, 2, 1.0);
  std::vector<double> x(202, 0.0);
  EXPECT_THROW(hessian_psd_check(X, x, 1.0), SizeError);
}

TEST(NullSpace, BasisIsAnnihilated) {
  const auto ds = partial_coverage();
  const auto X = comparison_matrix(ds, 2, 3, 1.0);
  const auto basis = null_space_basis(X);
  // Rank of X is 2 (third row is the sum of the first two), so 6 - 2 = 4.
  EXPECT_EQ(basis.size(), 4u);
  for (const auto& u : basis)
    for (std::size_t r = 0; r < X.rows.size(); ++r) EXPECT_NEAR(X.row_dot(r, u), 0.0, 1e-12);
}

TEST(NullSpace, ShiftPreservesLossButBreaksNormalization) {
  const auto ds = partial_coverage();
  const auto X = comparison_matrix(ds, 2, 3, 1.0);
  Rng rng(3);
  const Table lp = row_log_softmax(random_table(2, 3, rng));
  Table u(2, 3);
  u(0, 0) = u(0, 1) = 0.4;
  const auto report = null_space_shift(X, lp, u, 0.7);
  EXPECT_NEAR(report.loss_after, report.loss_before, 1e-12);
  EXPECT_FALSE(report.normalized());
  Table off(2, 3);
  off(0, 0) = 1.0;
  EXPECT_THROW(null_space_shift(X, lp, off, 0.7), ContractError);
}

TEST(Ood, UnseenActionsAndRenormalization) {
  const auto ds = partial_coverage();
  const auto ood = unseen_actions(ds, 2, 3);
  ASSERT_EQ(ood.size(), 2u);
  EXPECT_EQ(ood[0], std::optional<std::size_t>(2));
  EXPECT_EQ(ood[1], std::optional<std::size_t>(2));

  const auto X = comparison_matrix(ds, 2, 3, 1.0);
  Rng rng(4);
  const Table lp = row_log_softmax(random_table(2, 3, rng));
  Table u(2, 3);
  u(0, 0) = u(0, 1) = -0.3;
  u(1, 0) = u(1, 1) = 0.05;
  const Table v = ood_renormalization(lp, u, ood);
  Table total = u;
  for (std::size_t i = 0; i < total.size(); ++i) total.flat()[i] += v.flat()[i];
  const auto report = null_space_shift(X, lp, total, 1.0);
  EXPECT_TRUE(report.normalized());
  EXPECT_NEAR(report.loss_after, report.loss_before, 1e-12);

  Table on_ood = u;
  on_ood(0, 2) = 0.1;
  EXPECT_THROW(ood_renormalization(lp, on_ood, ood), ContractError);
  Table huge(2, 3);
  huge(0, 0) = huge(0, 1) = 10.0;
  EXPECT_THROW(ood_renormalization(lp, huge, ood), ContractError);
  const std::vector<std::optional<std::size_t>> none(2);
  EXPECT_THROW(ood_renormalization(lp, u, none), ContractError);
}

TEST(MatrixLoss, ConvexAlongSegments) {
  Rng rng(5);
  const auto ds = random_dataset(4, 3, 12, 3, rng);
  const auto X = comparison_matrix(ds, 4, 3, 0.9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(12), y(12), z(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = 4 * rng.uniform() - 2;
      y[i] = 4 * rng.uniform() - 2;
    }
    const double fx = matrix_loss(X, x, 0.5).loss, fy = matrix_loss(X, y, 0.5).loss;
    for (double t : {0.25, 0.5, 0.75}) {
      for (std::size_t i = 0; i < 12; ++i) z[i] = (1 - t) * x[i] + t * y[i];
      EXPECT_LE(matrix_loss(X, z, 0.5).loss, (1 - t) * fx + t * fy + 1e-10);
    }
  }
}

TEST(NullSpace, ContainsUnseenActionIndicator) {
  const auto X = comparison_matrix(partial_coverage(), 2, 3, 1.0);
  const auto basis = null_space_basis(X);
  for (std::size_t col : {2u, 5u}) {
    // Projection of the indicator onto the basis recovers it exactly.
    double norm = 0.0;
    for (const auto& b : basis) norm += b[col] * b[col];
    EXPECT_NEAR(norm, 1.0, 1e-12) << col;
  }
}

TEST(NullSpace, IndicatorShiftNeedsRenormalization) {
  const auto ds = partial_coverage();
  const auto X = comparison_matrix(ds, 2, 3, 1.0);
  Rng rng(6);
  const Table lp = row_log_softmax(random_table(2, 3, rng));
  Table u(2, 3);
  u(1, 2) = 0.8;
  const auto report = null_space_shift(X, lp, u, 1.0);
  EXPECT_NEAR(report.loss_after, report.loss_before, 1e-14);
  EXPECT_FALSE(report.normalized());
}

TEST(BiasedLoss, BreaksShiftDegeneracy) {
  // The constant shift on seen actions keeps the vanilla loss but not the
  // lambda-loss.
  const auto ds = partial_coverage();
  Rng rng(7);
  const Table lp = row_log_softmax(random_table(2, 3, rng));
  Table u(2, 3);
  for (std::size_t s = 0; s < 2; ++s) u(s, 0) = u(s, 1) = -0.4;
  const Table v = ood_renormalization(lp, u, unseen_actions(ds, 2, 3));
  Table shifted = lp;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.flat()[i] += u.flat()[i] + v.flat()[i];
  LossConfig cfg;
  cfg.alpha = 1.0;
  cfg.lambda = 0.5;
  EXPECT_NEAR(cpl_loss(shifted, ds, cfg).loss, cpl_loss(lp, ds, cfg).loss, 1e-12);
  EXPECT_GT(cpl_lambda_loss(shifted, ds, cfg).loss - cpl_lambda_loss(lp, ds, cfg).loss, 1e-3);
}

TEST(ComparisonMatrixJson, Layout) {
  const auto X = comparison_matrix(partial_coverage(), 2, 3, 1.0);
  std::ostringstream out;
  write_comparison_matrix_json(out, X);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j.at("num_rows"), 3);
  EXPECT_EQ(j.at("num_cols"), 6);
  EXPECT_EQ(j.at("triplets").size(), 2u + 2u + 4u);
}

}  // namespace
}  // namespace cpl
