// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cpl {

/// Dense row-major [rows][cols] table of doubles. Used for every per-(state,
/// action) quantity: rewards, Q/A tables, logits, log-policies, gradients.
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Table from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  std::vector<std::vector<double>> to_rows() const;

  bool same_shape(const Table& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Table&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// log(sum(exp(x))) with max subtraction. Returns -inf for an empty span.
double log_sum_exp(std::span<const double> x) noexcept;

/// Row-wise log-softmax with max shift.
Table row_log_softmax(const Table& logits);

/// Row-wise softmax with max shift.
Table row_softmax(const Table& logits);

double max_abs_diff(const Table& a, const Table& b);

double sup_norm(std::span<const double> x) noexcept;

/// Numerically stable log(1 + exp(x)).
double softplus(double x) noexcept;

/// Numerically stable 1 / (1 + exp(-x)).
double logistic(double x) noexcept;

}  // namespace cpl
