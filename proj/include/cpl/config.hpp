// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/mdp.hpp"
#include "cpl/objectives.hpp"
#include "cpl/oracle.hpp"
#include "cpl/preference.hpp"
#include "cpl/trainer.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cpl {

enum class FieldType { integer, real, optional_real, boolean, choice, real_list, path };

struct FieldSpec {
  std::string key;
  FieldType type = FieldType::real;
  /// Empty with `required` set means the key has no default.
  std::string default_value;
  bool required = false;
  std::vector<std::string> choices;
  std::string help;

  bool scalar() const noexcept { return type != FieldType::real_list && type != FieldType::path; }
};

/// Every accepted key, sorted by name.
const std::vector<FieldSpec>& config_schema();
const FieldSpec* find_field(std::string_view key);

/// Validated `section.key = value` pairs. Lines starting with '#' and blank
/// lines are ignored.
class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text, std::string_view origin = "<config>");
  static ConfigMap load(const std::string& path);

  /// Throws ConfigError naming the key for unknown keys or ill-typed values.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Explicit value, or the schema default.
  std::string get(const std::string& key) const;
  /// Copy with every default filled in; throws ConfigError for missing
  /// required keys.
  ConfigMap resolved() const;
  /// Canonical "key = value" lines in key order.
  std::string render() const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Annotated template listing every key with its default.
std::string config_template();

enum class EnvKind { gridworld, bandit, file, random };
enum class RolloutPolicy { epsilon_oracle, uniform, file };
enum class SegmentSource { rollouts, exhaustive };
enum class MethodName { cpl, sft, percent_bc, naive, bc };

struct EnvConfig {
  EnvKind kind = EnvKind::gridworld;
  GridworldSpec grid;
  std::vector<double> rewards;
  std::string path;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::uint64_t seed = 0;
  double gamma = 0.9;
};

struct DataConfig {
  std::size_t num_rollouts = 0;
  std::size_t horizon = 0;
  RolloutPolicy rollout_policy = RolloutPolicy::epsilon_oracle;
  double epsilon = 0.3;
  std::string policy_path;
  SegmentSource segment_source = SegmentSource::rollouts;
  std::size_t segment_length = 1;
  std::size_t num_segments = 0;
  Density density = Density::sparse;
  std::size_t comparisons_per_segment = 1;
  LabelMode label_mode = LabelMode::sampled;
  PreferenceModel preference_model = PreferenceModel::regret;
  RegretEstimator estimator = RegretEstimator::exact;
  /// Labeling discount; the MDP discount when unset.
  std::optional<double> score_gamma;
  /// Segments per ranking group; 0 builds pairs.
  std::size_t ranking_size = 0;
};

struct MethodConfig {
  MethodName name = MethodName::cpl;
  LossConfig loss;
  double bc_fraction = 0.1;
  std::size_t reference_steps = 500;
};

struct ExperimentConfig {
  EnvConfig env;
  double oracle_alpha = 0.1;
  SolverOptions solver;
  DataConfig data;
  MethodConfig method;
  OptimizerConfig optimizer;
  std::size_t eval_every = 0;
  bool include_entropy = false;
  std::string output_dir;
  std::uint64_t seed = 0;
  /// Resolved key-value form, written to config.copy.
  ConfigMap source;
};

/// Typed view of a config; throws ConfigError naming the offending field.
ExperimentConfig resolve_config(const ConfigMap& config);

/// SHA-1 of "blob <size>\0" + bytes, as lowercase hex (git's object id).
std::string git_blob_hash(std::string_view bytes);

std::string_view to_string(EnvKind k) noexcept;
std::string_view to_string(MethodName m) noexcept;

}  // namespace cpl
