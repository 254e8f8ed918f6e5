// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/analysis.hpp"

#include "cpl/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace cpl {

using nlohmann::json;

double ComparisonMatrix::row_dot(std::size_t row, std::span<const double> x) const {
  double total = 0.0;
  for (const auto& e : rows.at(row)) total += e.value * x[e.index];
  return total;
}

ComparisonMatrix comparison_matrix(const PreferenceDataset& dataset, std::size_t num_states,
                                   std::size_t num_actions, double gamma) {
  if (dataset.pairs.empty()) throw ParameterError("comparison_matrix needs a pair dataset");
  ComparisonMatrix m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.rows.reserve(dataset.pairs.size());
  for (const auto& pair : dataset.pairs) {
    std::map<std::size_t, double> acc;
    auto add = [&](const Segment& seg, double sign) {
      double w = sign;
      for (const auto& step : seg.steps) {
        if (step.state >= num_states || step.action >= num_actions)
          throw ParameterError("segment step out of range for the comparison matrix");
        acc[step.state * num_actions + step.action] += w;
        w *= gamma;
      }
    };
    add(pair.plus, 1.0);
    add(pair.minus, -1.0);
    std::vector<ComparisonMatrix::Entry> row;
    for (const auto& [index, value] : acc)
      if (value != 0.0) row.push_back({index, value});
    m.rows.push_back(std::move(row));
    m.soft_labels.push_back(pair.label_prob);
  }
  return m;
}

MatrixLoss matrix_loss(const ComparisonMatrix& matrix, std::span<const double> log_policy,
                       double alpha, TrainLabelMode mode, Reduction reduction) {
  if (log_policy.size() != matrix.num_cols())
    throw ParameterError("matrix_loss: log-policy has the wrong length");
  MatrixLoss out;
  out.grad.assign(matrix.num_cols(), 0.0);
  const double w =
      reduction == Reduction::mean ? 1.0 / static_cast<double>(matrix.rows.size()) : 1.0;
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const double z = alpha * matrix.row_dot(i, log_policy);
    double loss = 0.0;
    double dz = 0.0;
    if (mode == TrainLabelMode::hard) {
      loss = softplus(-z);
      dz = logistic(z) - 1.0;
    } else {
      const double p = matrix.soft_labels[i];
      loss = p * softplus(-z) + (1.0 - p) * softplus(z);
      dz = logistic(z) - p;
    }
    out.loss += w * loss;
    for (const auto& e : matrix.rows[i]) out.grad[e.index] += w * dz * alpha * e.value;
  }
  return out;
}

HessianReport hessian_psd_check(const ComparisonMatrix& matrix, std::span<const double> log_policy,
                                double alpha) {
  const std::size_t n = matrix.num_cols();
  if (n > kMaxHessianDim) throw SizeError("hessian_psd_check: S * A exceeds 200");
  if (log_policy.size() != n) throw ParameterError("hessian_psd_check: log-policy length mismatch");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const double s = logistic(alpha * matrix.row_dot(i, log_policy));
    const double d = alpha * alpha * s * (1.0 - s);
    for (const auto& a : matrix.rows[i])
      for (const auto& b : matrix.rows[i])
        h(static_cast<Eigen::Index>(a.index), static_cast<Eigen::Index>(b.index)) +=
            d * a.value * b.value;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("hessian eigensolve failed");
  HessianReport report;
  const auto& ev = solver.eigenvalues();
  report.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  report.min_eigenvalue = report.eigenvalues.empty() ? 0.0 : report.eigenvalues.front();
  double largest = 0.0;
  for (double v : report.eigenvalues) largest = std::max(largest, std::abs(v));
  for (double v : report.eigenvalues)
    if (v > 1e-10 * largest) ++report.rank;
  return report;
}

std::vector<std::vector<double>> null_space_basis(const ComparisonMatrix& matrix, double tol) {
  const auto rows = static_cast<Eigen::Index>(matrix.rows.size());
  const auto cols = static_cast<Eigen::Index>(matrix.num_cols());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (const auto& e : matrix.rows[static_cast<std::size_t>(i)])
      x(i, static_cast<Eigen::Index>(e.index)) = e.value;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = tol * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  std::vector<std::vector<double>> basis;
  const auto& v = svd.matrixV();
  for (Eigen::Index j = rank; j < cols; ++j) {
    std::vector<double> col(static_cast<std::size_t>(cols));
    for (Eigen::Index i = 0; i < cols; ++i) col[static_cast<std::size_t>(i)] = v(i, j);
    basis.push_back(std::move(col));
  }
  return basis;
}

ShiftReport null_space_shift(const ComparisonMatrix& matrix, const Table& log_policy,
                             const Table& u, double alpha) {
  if (log_policy.rows() != matrix.num_states || log_policy.cols() != matrix.num_actions ||
      !u.same_shape(log_policy))
    throw ParameterError("null_space_shift: shape mismatch");
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const double r = matrix.row_dot(i, u.flat());
    if (!(std::abs(r) <= 1e-8))
      throw ContractError("null_space_shift: u is not in the null space of X");
  }
  Table shifted = log_policy;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.flat()[i] += u.flat()[i];
  ShiftReport report;
  report.loss_before = matrix_loss(matrix, log_policy.flat(), alpha).loss;
  report.loss_after = matrix_loss(matrix, shifted.flat(), alpha).loss;
  for (std::size_t s = 0; s < shifted.rows(); ++s) {
    double total = 0.0;
    for (double lp : shifted.row(s)) total += std::exp(lp);
    report.normalization_error = std::max(report.normalization_error, std::abs(total - 1.0));
  }
  return report;
}

std::vector<std::optional<std::size_t>> unseen_actions(const PreferenceDataset& dataset,
                                                       std::size_t num_states,
                                                       std::size_t num_actions) {
  std::vector<bool> seen(num_states * num_actions, false);
  for (const Segment* seg : dataset.all_segments())
    for (const auto& step : seg->steps)
      if (step.state < num_states && step.action < num_actions)
        seen[step.state * num_actions + step.action] = true;
  std::vector<std::optional<std::size_t>> out(num_states);
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t a = 0; a < num_actions; ++a)
      if (!seen[s * num_actions + a]) {
        out[s] = a;
        break;
      }
  return out;
}

Table ood_renormalization(const Table& log_policy, const Table& u,
                          std::span<const std::optional<std::size_t>> ood_actions) {
  if (!u.same_shape(log_policy) || ood_actions.size() != log_policy.rows())
    throw ParameterError("ood_renormalization: shape mismatch");
  Table v(log_policy.rows(), log_policy.cols());
  for (std::size_t s = 0; s < log_policy.rows(); ++s) {
    const auto& ood = ood_actions[s];
    if (!ood) {
      for (double x : u.row(s))
        if (x != 0.0) throw ContractError("ood_renormalization: shifted state has no OOD action");
      continue;
    }
    const std::size_t a_ood = *ood;
    if (a_ood >= log_policy.cols()) throw ParameterError("ood_renormalization: action out of range");
    if (u(s, a_ood) != 0.0) throw ContractError("ood_renormalization: u must vanish on the OOD action");
    double mass = 0.0;
    for (std::size_t a = 0; a < log_policy.cols(); ++a)
      if (a != a_ood) mass += std::exp(log_policy(s, a) + u(s, a));
    if (!(mass < 1.0)) throw ContractError("ood_renormalization: shift leaves no mass for the OOD action");
    v(s, a_ood) = std::log1p(-mass) - log_policy(s, a_ood);
  }
  return v;
}

void write_comparison_matrix_json(std::ostream& out, const ComparisonMatrix& matrix) {
  json triplets = json::array();
  for (std::size_t i = 0; i < matrix.rows.size(); ++i)
    for (const auto& e : matrix.rows[i]) triplets.push_back(json::array({i, e.index, e.value}));
  json j = {{"num_actions", matrix.num_actions},
            {"num_cols", matrix.num_cols()},
            {"num_rows", matrix.rows.size()},
            {"num_states", matrix.num_states},
            {"soft_labels", matrix.soft_labels},
            {"triplets", std::move(triplets)}};
  out << j.dump() << '\n';
}

}  // namespace cpl
