// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cpl/config.hpp"
#include "cpl/mdp.hpp"
#include "cpl/objectives.hpp"
#include "cpl/oracle.hpp"
#include "cpl/preference.hpp"
#include "cpl/trainer.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpl {

TabularMDP build_environment(const ExperimentConfig& config);
SoftSolution solve_oracle(const ExperimentConfig& config, const TabularMDP& mdp);

/// Behavior policy named by data.rollout_policy.
Table rollout_policy(const ExperimentConfig& config, const TabularMDP& mdp,
                     const SoftSolution& oracle);

struct DataArtifacts {
  std::vector<Trajectory> rollouts;
  std::vector<Segment> segments;
  PreferenceDataset dataset;
  /// Segments with their labeling scores (dense_batch training).
  std::vector<ScoredSegment> batch;
};

/// Rollouts, segments and labels, drawn from the "rollout", "segments" and
/// "labels" streams of the root seed.
DataArtifacts generate_data(const ExperimentConfig& config, const TabularMDP& mdp,
                            const SoftSolution& oracle);

/// Ground-truth scorer implied by the data section.
SegmentScorer make_scorer(const ExperimentConfig& config, const TabularMDP& mdp,
                          const SoftSolution& oracle);

struct MethodOutput {
  PolicyLogits policy;
  TrainTrace trace;
  /// Fitted A_theta of the naive baseline.
  std::optional<Table> advantage;
};

MethodOutput run_method(const ExperimentConfig& config, const TabularMDP& mdp,
                        const SoftSolution& oracle, const DataArtifacts& data);

/// {policy_return, oracle_return, kl_to_optimal, argmax_agreement}. KL is
/// the state-uniform mean; argmax ties resolve to the lowest action index.
std::map<std::string, double> evaluate(const Table& policy, const TabularMDP& mdp,
                                       const SoftSolution& oracle, bool include_entropy = false);

struct ResultRecord {
  std::string config_hash;
  std::string dataset_hash;
  std::map<std::string, double> metrics;
  double wall_time = 0.0;
  std::string trace_path;
  std::string output_dir;

  /// Sorted-key JSON.
  std::string to_json() const;
};

/// Full pipeline. Writes config.copy, dataset.jsonl, trace.csv, metrics.csv,
/// policy.json and result.json under output.dir. Failures are rethrown as
/// StageError tagged env, oracle, data, train, eval or output.
ResultRecord run_experiment(const ConfigMap& config);

/// Data stage only: config.copy and dataset.jsonl under output.dir.
/// Returns the dataset hash.
std::string generate_dataset_files(const ConfigMap& config);

/// Train stage on an existing dataset file (rollouts for percent_bc are
/// regenerated from the seed).
ResultRecord train_from_dataset(const ConfigMap& config, const std::string& dataset_path);

/// Evaluate a policy.json file against the configured environment.
std::map<std::string, double> evaluate_policy_file(const ConfigMap& config,
                                                   const std::string& policy_path);

/// One run per value of a scalar key, each in output.dir/<key>=<value>,
/// plus output.dir/sweep.csv. Throws ParameterError for list or path keys.
std::vector<ResultRecord> sweep(const ConfigMap& base, const std::string& axis,
                                std::span<const std::string> values);

/// {"logits": [[...]], "policy": [[...]]}.
void write_policy_json(std::ostream& out, const PolicyLogits& policy);
/// Reads "policy" (probabilities); rows must be stochastic.
Table read_policy_json(std::istream& in);
Table load_policy(const std::string& path);

}  // namespace cpl
