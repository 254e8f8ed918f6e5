// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/objectives.hpp"
#include "cpl/preference.hpp"
#include "cpl/table.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cpl {

/// Sparse signed design matrix of a pair dataset. Row i holds +gamma^t at
/// the flat index s * A + a of every step of plus and -gamma^t for minus,
/// accumulated, with exact zeros dropped. Columns are sorted.
struct ComparisonMatrix {
  struct Entry {
    std::size_t index = 0;
    double value = 0.0;
  };
  std::vector<std::vector<Entry>> rows;
  std::vector<double> soft_labels;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;

  std::size_t num_cols() const noexcept { return num_states * num_actions; }
  double row_dot(std::size_t row, std::span<const double> x) const;
};

ComparisonMatrix comparison_matrix(const PreferenceDataset& dataset, std::size_t num_states,
                                   std::size_t num_actions, double gamma);

struct MatrixLoss {
  double loss = 0.0;
  /// Gradient with respect to the flat log-policy vector.
  std::vector<double> grad;
};

/// -sum_i log logistic(alpha * x_i . log_policy) (hard) or the soft-label
/// cross-entropy, evaluated through the matrix.
MatrixLoss matrix_loss(const ComparisonMatrix& matrix, std::span<const double> log_policy,
                       double alpha, TrainLabelMode mode = TrainLabelMode::hard,
                       Reduction reduction = Reduction::sum);

struct HessianReport {
  double min_eigenvalue = 0.0;
  /// Ascending.
  std::vector<double> eigenvalues;
  /// Eigenvalues above 1e-10 times the largest magnitude.
  std::size_t rank = 0;
};

inline constexpr std::size_t kMaxHessianDim = 200;

/// Eigen-decomposition of alpha^2 X^T D X with D_ii = s_i (1 - s_i), the
/// Hessian of the summed matrix loss in log-policy space. Throws SizeError
/// when S * A > 200.
HessianReport hessian_psd_check(const ComparisonMatrix& matrix, std::span<const double> log_policy,
                                double alpha);

/// Orthonormal basis of N(X) from a full SVD. Singular values below
/// tol * max(1, largest) count as zero.
std::vector<std::vector<double>> null_space_basis(const ComparisonMatrix& matrix,
                                                  double tol = 1e-10);

struct ShiftReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  /// max_s |sum_a exp(log_policy + u) - 1|.
  double normalization_error = 0.0;
  bool normalized() const noexcept { return normalization_error <= 1e-8; }
};

/// Shifts the log-policy by u and reports the summed hard-label vanilla
/// loss before and after. Throws ContractError when |X u|_inf > 1e-8.
ShiftReport null_space_shift(const ComparisonMatrix& matrix, const Table& log_policy,
                             const Table& u, double alpha);

/// First action of each state that no segment of the dataset visits.
std::vector<std::optional<std::size_t>> unseen_actions(const PreferenceDataset& dataset,
                                                       std::size_t num_states,
                                                       std::size_t num_actions);

/// Correction v supported on one OOD action per state such that
/// exp(log_policy + u + v) is row-normalized:
///   v(s, a_ood) = log(1 - sum_{a != a_ood} pi(a|s) e^{u(s,a)}) - log pi(a_ood|s).
/// Requires u(s, a_ood) = 0 and the bracket to be positive (ContractError).
/// States without an OOD action must have u = 0 on their row.
Table ood_renormalization(const Table& log_policy, const Table& u,
                          std::span<const std::optional<std::size_t>> ood_actions);

/// {"num_actions", "num_cols", "num_rows", "num_states", "soft_labels",
///  "triplets": [[row, col, value], ...]}.
void write_comparison_matrix_json(std::ostream& out, const ComparisonMatrix& matrix);

}  // namespace cpl
