// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/table.hpp"

#include "cpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpl {

Table Table::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Table t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw ParameterError("Table::from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), t.row(r).begin());
  }
  return t;
}

std::vector<std::vector<double>> Table::to_rows() const {
  std::vector<std::vector<double>> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r].assign(row(r).begin(), row(r).end());
  return out;
}

double log_sum_exp(std::span<const double> x) noexcept {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

Table row_log_softmax(const Table& logits) {
  Table out(logits.rows(), logits.cols());
  for (std::size_t s = 0; s < logits.rows(); ++s) {
    const double lse = log_sum_exp(logits.row(s));
    for (std::size_t a = 0; a < logits.cols(); ++a) out(s, a) = logits(s, a) - lse;
  }
  return out;
}

Table row_softmax(const Table& logits) {
  Table out = row_log_softmax(logits);
  for (double& v : out.flat()) v = std::exp(v);
  return out;
}

double max_abs_diff(const Table& a, const Table& b) {
  if (!a.same_shape(b)) throw ParameterError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
  return m;
}

double sup_norm(std::span<const double> x) noexcept {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

double softplus(double x) noexcept {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace cpl
