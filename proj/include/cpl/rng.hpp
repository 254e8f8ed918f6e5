// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace cpl {

/// Counter-based generator. Output i of a stream with key k is
/// splitmix64_finalize(k + (i + 1) * 0x9E3779B97F4A7C15), i.e. the SplitMix64
/// sequence seeded with k. Streams are split by hashing a name or an index
/// into a fresh key, so derived streams never share state with their parent.
///
/// The algorithm is part of the file-format contract: datasets generated with
/// a given seed must stay byte-identical across releases.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : key_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Index drawn with probability proportional to weights[i] (non-negative).
  std::size_t categorical(std::span<const double> weights);

  /// Independent stream named by a string ("rollout", "labels", ...).
  Rng derive(std::string_view name) const noexcept;

  /// Independent stream for the index-th work item.
  Rng split(std::uint64_t index) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace cpl
