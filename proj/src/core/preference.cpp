// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/preference.hpp"

#include "cpl/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace cpl {

using nlohmann::json;

std::string_view to_string(PreferenceModel m) noexcept {
  return m == PreferenceModel::regret ? "regret" : "partial_return";
}
std::string_view to_string(RegretEstimator e) noexcept {
  return e == RegretEstimator::exact ? "exact" : "telescoped";
}
std::string_view to_string(LabelMode m) noexcept {
  switch (m) {
    case LabelMode::sampled: return "sampled";
    case LabelMode::argmax: return "argmax";
    case LabelMode::soft: return "soft";
  }
  return "sampled";
}
std::string_view to_string(Density d) noexcept { return d == Density::dense ? "dense" : "sparse"; }

PreferenceModel parse_preference_model(std::string_view s) {
  if (s == "regret") return PreferenceModel::regret;
  if (s == "partial_return") return PreferenceModel::partial_return;
  throw ParameterError("unknown preference model '" + std::string(s) + "'");
}
RegretEstimator parse_regret_estimator(std::string_view s) {
  if (s == "exact") return RegretEstimator::exact;
  if (s == "telescoped") return RegretEstimator::telescoped;
  throw ParameterError("unknown regret estimator '" + std::string(s) + "'");
}
LabelMode parse_label_mode(std::string_view s) {
  if (s == "sampled") return LabelMode::sampled;
  if (s == "argmax") return LabelMode::argmax;
  if (s == "soft") return LabelMode::soft;
  throw ParameterError("unknown label mode '" + std::string(s) + "'");
}
Density parse_density(std::string_view s) {
  if (s == "dense") return Density::dense;
  if (s == "sparse") return Density::sparse;
  throw ParameterError("unknown density '" + std::string(s) + "'");
}

std::vector<const Segment*> PreferenceDataset::all_segments() const {
  std::vector<const Segment*> out;
  for (const auto& pair : pairs) {
    out.push_back(&pair.plus);
    out.push_back(&pair.minus);
  }
  for (const auto& group : rankings)
    for (const auto& seg : group.segments) out.push_back(&seg);
  return out;
}

SegmentScorer::SegmentScorer(PreferenceModel model, TabularMDP mdp,
                             std::optional<SoftSolution> oracle, double gamma,
                             RegretEstimator estimator)
    : model_(model), mdp_(std::move(mdp)), oracle_(std::move(oracle)), gamma_(gamma),
      estimator_(estimator) {
  if (model_ == PreferenceModel::regret && !oracle_)
    throw ParameterError("regret scoring requires an oracle solution");
  if (!(gamma_ >= 0.0 && gamma_ <= 1.0)) throw ParameterError("score gamma must lie in [0, 1]");
}

double SegmentScorer::operator()(const Segment& segment) const {
  return score_segment(model_, segment, oracle_ ? &*oracle_ : nullptr, mdp_, gamma_, estimator_);
}

double score_segment(PreferenceModel model, const Segment& segment, const SoftSolution* oracle,
                     const TabularMDP& mdp, double gamma, RegretEstimator estimator) {
  for (const auto& step : segment.steps)
    if (step.state >= mdp.num_states || step.action >= mdp.num_actions)
      throw ParameterError("segment step out of range for the MDP");
  if (model == PreferenceModel::partial_return) return partial_return(segment, mdp, gamma);
  if (oracle == nullptr) throw ParameterError("regret scoring requires an oracle solution");
  if (estimator == RegretEstimator::telescoped)
    return segment_advantage_telescoped(*oracle, mdp, segment, gamma);
  return segment_advantage_exact(*oracle, segment, gamma);
}

double preference_probability(double score_plus, double score_minus) noexcept {
  return logistic(score_plus - score_minus);
}

std::vector<Segment> sample_segments(std::span<const Trajectory> rollouts, std::size_t k,
                                     std::size_t count, std::uint64_t seed) {
  if (k == 0) throw ParameterError("sample_segments: k must be at least 1");
  if (count == 0) return {};
  if (rollouts.empty()) throw ParameterError("sample_segments: no trajectories");
  // windows[i] = number of valid offsets in trajectory i.
  std::vector<std::size_t> cumulative;
  cumulative.reserve(rollouts.size());
  std::size_t total = 0;
  for (const auto& traj : rollouts) {
    if (traj.horizon() < k)
      throw ParameterError("sample_segments: segment length exceeds a trajectory's length");
    total += traj.horizon() - k + 1;
    cumulative.push_back(total);
  }
  Rng rng(seed);
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t idx = rng.below(total);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), idx);
    const auto traj_index = static_cast<std::size_t>(it - cumulative.begin());
    const std::size_t before = traj_index == 0 ? 0 : cumulative[traj_index - 1];
    const std::size_t offset = idx - before;
    const Trajectory& traj = rollouts[traj_index];
    Segment seg;
    seg.source_trajectory = traj_index;
    seg.source_offset = offset;
    seg.steps.reserve(k);
    for (std::size_t t = 0; t < k; ++t)
      seg.steps.push_back({traj.states[offset + t], traj.actions[offset + t]});
    seg.next_state = traj.states[offset + k];
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<Segment> exhaustive_unit_segments(std::size_t num_states, std::size_t num_actions) {
  std::vector<Segment> out;
  out.reserve(num_states * num_actions);
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t a = 0; a < num_actions; ++a) {
      Segment seg;
      seg.steps.push_back({s, a});
      seg.source_offset = out.size();
      out.push_back(std::move(seg));
    }
  return out;
}

PreferencePair label_pair(const Segment& a, const Segment& b, double prob_a_over_b,
                          LabelMode mode, Rng& rng) {
  if (!(prob_a_over_b >= 0.0 && prob_a_over_b <= 1.0))
    throw ParameterError("label_pair: probability must lie in [0, 1]");
  bool a_wins = true;
  switch (mode) {
    case LabelMode::sampled: a_wins = rng.uniform() < prob_a_over_b; break;
    case LabelMode::argmax:
      if (prob_a_over_b != 0.5) {
        a_wins = prob_a_over_b > 0.5;
      } else {
        a_wins = compare_steps(a, b) != std::strong_ordering::greater;
      }
      break;
    case LabelMode::soft: a_wins = true; break;
  }
  PreferencePair pair;
  pair.mode = mode;
  if (a_wins) {
    pair.plus = a;
    pair.minus = b;
    pair.label_prob = prob_a_over_b;
  } else {
    pair.plus = b;
    pair.minus = a;
    pair.label_prob = 1.0 - prob_a_over_b;
  }
  return pair;
}

namespace {

std::size_t common_length(std::span<const Segment> segments) {
  if (segments.empty()) return 0;
  const std::size_t k = segments.front().length();
  if (k == 0) throw ParameterError("segments must have at least one step");
  for (const auto& seg : segments)
    if (seg.length() != k) throw ParameterError("segments must share one length");
  return k;
}

DatasetMetadata base_meta(std::span<const Segment> segments, const SegmentScorer& scorer,
                          Density density, LabelMode mode) {
  DatasetMetadata meta;
  meta.preference_model = scorer.model();
  meta.score_alpha = scorer.alpha();
  meta.score_gamma = scorer.gamma();
  meta.segment_length = common_length(segments);
  meta.density = density;
  meta.label_mode = mode;
  return meta;
}

std::vector<double> score_all(std::span<const Segment> segments, const SegmentScorer& scorer) {
  std::vector<double> scores;
  scores.reserve(segments.size());
  for (const auto& seg : segments) scores.push_back(scorer(seg));
  return scores;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace

PreferenceDataset build_dense_dataset(std::span<const Segment> segments,
                                      const SegmentScorer& scorer, LabelMode mode, Rng& rng,
                                      std::size_t max_segments) {
  if (segments.size() < 2) throw ParameterError("build_dense_dataset: need at least 2 segments");
  if (segments.size() > max_segments)
    throw SizeError("build_dense_dataset: " + std::to_string(segments.size()) +
                    " segments exceed the cap of " + std::to_string(max_segments));
  PreferenceDataset ds;
  ds.meta = base_meta(segments, scorer, Density::dense, mode);
  const auto scores = score_all(segments, scorer);
  const Rng labels = rng.derive("dense");
  const std::size_t n = segments.size();
  ds.pairs.reserve(n * (n - 1) / 2);
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Rng pair_rng = labels.split(index++);
      ds.pairs.push_back(label_pair(segments[i], segments[j],
                                    preference_probability(scores[i], scores[j]), mode, pair_rng));
    }
  return ds;
}

PreferenceDataset build_matched_dataset(std::span<const Segment> segments,
                                        const SegmentScorer& scorer, std::size_t rounds,
                                        LabelMode mode, Rng& rng) {
  if (segments.size() < 2 || segments.size() % 2 != 0)
    throw ParameterError("sparse labeling needs a positive even number of segments");
  if (rounds == 0) throw ParameterError("sparse labeling needs at least one comparison per segment");
  PreferenceDataset ds;
  ds.meta = base_meta(segments, scorer, Density::sparse, mode);
  ds.meta.comparisons_per_segment = rounds;
  const auto scores = score_all(segments, scorer);
  const Rng matching = rng.derive("matching");
  const Rng labels = rng.derive("sparse");
  const std::size_t n = segments.size();
  ds.pairs.reserve(rounds * n / 2);
  std::uint64_t index = 0;
  for (std::size_t round = 0; round < rounds; ++round) {
    const auto order = shuffled_indices(n, matching.split(round));
    for (std::size_t m = 0; m + 1 < n; m += 2) {
      const std::size_t i = order[m];
      const std::size_t j = order[m + 1];
      Rng pair_rng = labels.split(index++);
      ds.pairs.push_back(label_pair(segments[i], segments[j],
                                    preference_probability(scores[i], scores[j]), mode, pair_rng));
    }
  }
  return ds;
}

PreferenceDataset build_sparse_dataset(std::span<const Segment> segments,
                                       const SegmentScorer& scorer, LabelMode mode, Rng& rng) {
  return build_matched_dataset(segments, scorer, 1, mode, rng);
}

PreferenceDataset build_rankings(std::span<const Segment> segments, const SegmentScorer& scorer,
                                 std::size_t group_size, LabelMode mode, Rng& rng) {
  if (group_size < 2) throw ParameterError("build_rankings: group size must be at least 2");
  if (segments.empty() || segments.size() % group_size != 0)
    throw ParameterError("build_rankings: segment count must be a positive multiple of the group size");
  if (mode == LabelMode::soft)
    throw ParameterError("build_rankings: soft labels are not defined for rankings");
  PreferenceDataset ds;
  ds.meta = base_meta(segments, scorer, Density::dense, mode);
  const auto scores = score_all(segments, scorer);
  const Rng groups = rng.derive("rankings");
  const std::size_t num_groups = segments.size() / group_size;
  ds.rankings.reserve(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    std::vector<std::size_t> remaining(group_size);
    std::iota(remaining.begin(), remaining.end(), g * group_size);
    std::vector<std::size_t> order;
    order.reserve(group_size);
    if (mode == LabelMode::argmax) {
      order = remaining;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return compare_steps(segments[x], segments[y]) == std::strong_ordering::less;
      });
    } else {
      Rng group_rng = groups.split(g);
      std::vector<double> weights;
      while (!remaining.empty()) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t idx : remaining) top = std::max(top, scores[idx]);
        weights.clear();
        for (std::size_t idx : remaining) weights.push_back(std::exp(scores[idx] - top));
        const std::size_t pick = group_rng.categorical(weights);
        order.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
    RankingGroup group;
    for (std::size_t idx : order) group.segments.push_back(segments[idx]);
    ds.rankings.push_back(std::move(group));
  }
  return ds;
}

namespace {

json segment_to_json(const Segment& seg) {
  json arr = json::array();
  for (const auto& step : seg.steps) arr.push_back({step.state, step.action});
  return arr;
}

Segment segment_from_json(const json& arr) {
  Segment seg;
  for (const auto& step : arr) {
    if (!step.is_array() || step.size() != 2) throw IoError("segment step must be [state, action]");
    seg.steps.push_back({step[0].get<std::size_t>(), step[1].get<std::size_t>()});
  }
  if (seg.steps.empty()) throw IoError("empty segment in dataset");
  return seg;
}

}  // namespace

void write_dataset(std::ostream& out, const PreferenceDataset& dataset) {
  const auto& m = dataset.meta;
  json meta = {
      {"comparisons_per_segment", m.comparisons_per_segment},
      {"density", to_string(m.density)},
      {"kind", dataset.is_ranking() ? "rankings" : "pairs"},
      {"label_mode", to_string(m.label_mode)},
      {"preference_model", to_string(m.preference_model)},
      {"score_alpha", m.score_alpha},
      {"score_gamma", m.score_gamma},
      {"seed", m.seed},
      {"segment_length", m.segment_length},
  };
  out << json{{"meta", std::move(meta)}}.dump() << '\n';
  for (const auto& pair : dataset.pairs) {
    json line = {{"label_prob", pair.label_prob},
                 {"minus", segment_to_json(pair.minus)},
                 {"plus", segment_to_json(pair.plus)}};
    out << line.dump() << '\n';
  }
  for (const auto& group : dataset.rankings) {
    json ranked = json::array();
    for (const auto& seg : group.segments) ranked.push_back(segment_to_json(seg));
    out << json{{"ranked", std::move(ranked)}}.dump() << '\n';
  }
}

PreferenceDataset read_dataset(std::istream& in) {
  PreferenceDataset ds;
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset file is empty");
  try {
    const json header = json::parse(line);
    const json& m = header.at("meta");
    ds.meta.comparisons_per_segment = m.value("comparisons_per_segment", std::size_t{1});
    ds.meta.density = parse_density(m.at("density").get<std::string>());
    ds.meta.label_mode = parse_label_mode(m.at("label_mode").get<std::string>());
    ds.meta.preference_model = parse_preference_model(m.at("preference_model").get<std::string>());
    ds.meta.score_alpha = m.at("score_alpha").get<double>();
    ds.meta.score_gamma = m.at("score_gamma").get<double>();
    ds.meta.seed = m.at("seed").get<std::uint64_t>();
    ds.meta.segment_length = m.at("segment_length").get<std::size_t>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json obj = json::parse(line);
      if (obj.contains("ranked")) {
        RankingGroup group;
        for (const auto& seg : obj["ranked"]) group.segments.push_back(segment_from_json(seg));
        if (group.segments.size() < 2)
          throw IoError("ranking on line " + std::to_string(line_no) + " has fewer than 2 segments");
        ds.rankings.push_back(std::move(group));
      } else {
        PreferencePair pair;
        pair.plus = segment_from_json(obj.at("plus"));
        pair.minus = segment_from_json(obj.at("minus"));
        pair.label_prob = obj.at("label_prob").get<double>();
        pair.mode = ds.meta.label_mode;
        if (!(pair.label_prob >= 0.0 && pair.label_prob <= 1.0))
          throw IoError("label_prob out of range on line " + std::to_string(line_no));
        ds.pairs.push_back(std::move(pair));
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("dataset parse error: ") + e.what());
  }
  for (const Segment* seg : ds.all_segments())
    if (seg->length() != ds.meta.segment_length)
      throw IoError("dataset segment length disagrees with its header");
  return ds;
}

std::string dataset_to_string(const PreferenceDataset& dataset) {
  std::ostringstream out;
  write_dataset(out, dataset);
  return out.str();
}

void save_dataset(const std::string& path, const PreferenceDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_dataset(out, dataset);
}

PreferenceDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return read_dataset(in);
}

}  // namespace cpl
