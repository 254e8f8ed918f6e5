// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/mdp.hpp"
#include "cpl/oracle.hpp"
#include "cpl/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cpl {

enum class PreferenceModel { regret, partial_return };
enum class RegretEstimator { exact, telescoped };
enum class LabelMode { sampled, argmax, soft };
enum class Density { dense, sparse };

std::string_view to_string(PreferenceModel m) noexcept;
std::string_view to_string(RegretEstimator e) noexcept;
std::string_view to_string(LabelMode m) noexcept;
std::string_view to_string(Density d) noexcept;
PreferenceModel parse_preference_model(std::string_view s);
RegretEstimator parse_regret_estimator(std::string_view s);
LabelMode parse_label_mode(std::string_view s);
Density parse_density(std::string_view s);

/// A labeled comparison. `label_prob` is the oracle probability that `plus`
/// is preferred to `minus`. In sampled/argmax modes `plus` is the side that
/// was chosen; in soft mode the orientation is the construction order.
struct PreferencePair {
  Segment plus;
  Segment minus;
  double label_prob = 0.5;
  LabelMode mode = LabelMode::sampled;
};

/// Segments ordered best first.
struct RankingGroup {
  std::vector<Segment> segments;
};

struct DatasetMetadata {
  PreferenceModel preference_model = PreferenceModel::regret;
  double score_alpha = 0.0;
  double score_gamma = 1.0;
  std::size_t segment_length = 0;
  Density density = Density::dense;
  LabelMode label_mode = LabelMode::sampled;
  std::uint64_t seed = 0;
  /// Random perfect matchings per segment (sparse datasets only).
  std::size_t comparisons_per_segment = 1;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  std::vector<RankingGroup> rankings;
  DatasetMetadata meta;

  bool is_ranking() const noexcept { return !rankings.empty(); }
  /// Every segment referenced by the dataset, in file order.
  std::vector<const Segment*> all_segments() const;
};

/// Scores segments under the regret model (oracle advantages) or the
/// partial-return model (true rewards).
class SegmentScorer {
 public:
  /// Throws ParameterError when model == regret and no oracle is given.
  SegmentScorer(PreferenceModel model, TabularMDP mdp, std::optional<SoftSolution> oracle,
                double gamma, RegretEstimator estimator = RegretEstimator::exact);

  double operator()(const Segment& segment) const;

  PreferenceModel model() const noexcept { return model_; }
  RegretEstimator estimator() const noexcept { return estimator_; }
  double gamma() const noexcept { return gamma_; }
  /// Oracle temperature, or 0 for the partial-return model.
  double alpha() const noexcept { return oracle_ ? oracle_->alpha : 0.0; }

 private:
  PreferenceModel model_;
  TabularMDP mdp_;
  std::optional<SoftSolution> oracle_;
  double gamma_;
  RegretEstimator estimator_;
};

double score_segment(PreferenceModel model, const Segment& segment, const SoftSolution* oracle,
                     const TabularMDP& mdp, double gamma,
                     RegretEstimator estimator = RegretEstimator::exact);

/// Bradley-Terry probability exp(s+) / (exp(s+) + exp(s-)), evaluated as
/// logistic(s+ - s-).
double preference_probability(double score_plus, double score_minus) noexcept;

/// Draws `count` contiguous length-k windows uniformly over all
/// (trajectory, offset) positions.
std::vector<Segment> sample_segments(std::span<const Trajectory> rollouts, std::size_t k,
                                     std::size_t count, std::uint64_t seed);

/// Every (state, action) pair as a length-1 segment, in state-major order.
std::vector<Segment> exhaustive_unit_segments(std::size_t num_states, std::size_t num_actions);

/// sampled: Bernoulli(prob) decides whether `a` is preferred.
/// argmax: the more probable side wins; exact ties go to the
///         lexicographically smaller (state, action) sequence.
/// soft:   `a` is kept as plus and prob is stored.
PreferencePair label_pair(const Segment& a, const Segment& b, double prob_a_over_b,
                          LabelMode mode, Rng& rng);

inline constexpr std::size_t kDefaultDenseSegmentCap = 2000;

/// All n(n-1)/2 unordered pairs, in (i, j), i < j order.
PreferenceDataset build_dense_dataset(std::span<const Segment> segments,
                                      const SegmentScorer& scorer, LabelMode mode, Rng& rng,
                                      std::size_t max_segments = kDefaultDenseSegmentCap);

/// One random perfect matching, n/2 pairs.
PreferenceDataset build_sparse_dataset(std::span<const Segment> segments,
                                       const SegmentScorer& scorer, LabelMode mode, Rng& rng);

/// `rounds` independent random perfect matchings, rounds * n/2 pairs.
PreferenceDataset build_matched_dataset(std::span<const Segment> segments,
                                        const SegmentScorer& scorer, std::size_t rounds,
                                        LabelMode mode, Rng& rng);

/// Consecutive groups of K segments ordered by Plackett-Luce sampling over
/// exp(score) (sampled) or by descending score (argmax).
PreferenceDataset build_rankings(std::span<const Segment> segments, const SegmentScorer& scorer,
                                 std::size_t group_size, LabelMode mode, Rng& rng);

/// JSON Lines: a {"meta": {...}} header, then one object per pair
/// {"label_prob", "minus", "plus"} or per ranking {"ranked"}. Keys sorted.
void write_dataset(std::ostream& out, const PreferenceDataset& dataset);
PreferenceDataset read_dataset(std::istream& in);
std::string dataset_to_string(const PreferenceDataset& dataset);
void save_dataset(const std::string& path, const PreferenceDataset& dataset);
PreferenceDataset load_dataset(const std::string& path);

}  // namespace cpl
