// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/experiment.hpp"

#include "cpl/baselines.hpp"
#include "cpl/error.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cpl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class F>
auto in_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::vector<StateAction> dataset_steps(const PreferenceDataset& dataset) {
  std::vector<StateAction> out;
  for (const Segment* seg : dataset.all_segments())
    for (const auto& step : seg->steps) out.push_back(step);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << bytes;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string number(double v) { return json(v).dump(); }

std::vector<ScoredSegment> score_batch(std::span<const Segment> segments,
                                       const SegmentScorer& scorer) {
  std::vector<ScoredSegment> batch;
  batch.reserve(segments.size());
  for (const auto& seg : segments) batch.push_back({seg, scorer(seg)});
  return batch;
}

bool wants_batch(const ExperimentConfig& c) {
  return c.method.name == MethodName::cpl && c.method.loss.variant == LossVariant::dense_batch;
}

}  // namespace

TabularMDP build_environment(const ExperimentConfig& c) {
  switch (c.env.kind) {
    case EnvKind::gridworld: return build_gridworld(c.env.grid);
    case EnvKind::bandit: return build_single_state_bandit(c.env.rewards, c.env.gamma);
    case EnvKind::file: return load_mdp(c.env.path);
    case EnvKind::random:
      return build_random_mdp(c.env.num_states, c.env.num_actions, c.env.gamma, c.env.seed);
  }
  throw ConfigError("env.kind: unsupported");
}

SoftSolution solve_oracle(const ExperimentConfig& c, const TabularMDP& mdp) {
  return soft_value_iteration(mdp, c.oracle_alpha, c.solver);
}

Table rollout_policy(const ExperimentConfig& c, const TabularMDP& mdp, const SoftSolution& oracle) {
  const double uniform = 1.0 / static_cast<double>(mdp.num_actions);
  switch (c.data.rollout_policy) {
    case RolloutPolicy::uniform: return Table(mdp.num_states, mdp.num_actions, uniform);
    case RolloutPolicy::epsilon_oracle: {
      Table pi = oracle.pi_star;
      for (double& p : pi.flat()) p = (1.0 - c.data.epsilon) * p + c.data.epsilon * uniform;
      return pi;
    }
    case RolloutPolicy::file: {
      Table pi = load_policy(c.data.policy_path);
      require_stochastic_policy(mdp, pi);
      return pi;
    }
  }
  throw ConfigError("data.rollout_policy: unsupported");
}

SegmentScorer make_scorer(const ExperimentConfig& c, const TabularMDP& mdp,
                          const SoftSolution& oracle) {
  std::optional<SoftSolution> solution;
  if (c.data.preference_model == PreferenceModel::regret) solution = oracle;
  return SegmentScorer(c.data.preference_model, mdp, std::move(solution),
                       c.data.score_gamma.value_or(mdp.discount), c.data.estimator);
}

DataArtifacts generate_data(const ExperimentConfig& c, const TabularMDP& mdp,
                            const SoftSolution& oracle) {
  DataArtifacts out;
  const Rng root(c.seed);
  if (c.data.num_rollouts > 0 && c.data.horizon > 0) {
    const Table behavior = rollout_policy(c, mdp, oracle);
    const Rng streams = root.derive("rollout");
    out.rollouts.reserve(c.data.num_rollouts);
    for (std::size_t i = 0; i < c.data.num_rollouts; ++i) {
      Rng rng = streams.split(i);
      out.rollouts.push_back(sample_rollout(mdp, behavior, c.data.horizon, rng));
    }
  }
  if (c.data.segment_source == SegmentSource::exhaustive) {
    out.segments = exhaustive_unit_segments(mdp.num_states, mdp.num_actions);
  } else {
    out.segments = sample_segments(out.rollouts, c.data.segment_length, c.data.num_segments,
                                   root.derive("segments").key());
  }
  const SegmentScorer scorer = make_scorer(c, mdp, oracle);
  Rng labels = root.derive("labels");
  if (c.data.ranking_size > 0) {
    out.dataset = build_rankings(out.segments, scorer, c.data.ranking_size, c.data.label_mode, labels);
  } else if (c.data.density == Density::dense) {
    out.dataset = build_dense_dataset(out.segments, scorer, c.data.label_mode, labels);
  } else {
    out.dataset = build_matched_dataset(out.segments, scorer, c.data.comparisons_per_segment,
                                        c.data.label_mode, labels);
  }
  out.dataset.meta.seed = c.seed;
  if (wants_batch(c)) out.batch = score_batch(out.segments, scorer);
  return out;
}

std::map<std::string, double> evaluate(const Table& policy, const TabularMDP& mdp,
                                       const SoftSolution& oracle, bool include_entropy) {
  if (policy.rows() != mdp.num_states || policy.cols() != mdp.num_actions)
    throw ParameterError("evaluate: policy shape does not match the MDP");
  require_stochastic_policy(mdp, policy);
  ReturnOptions opts;
  opts.include_entropy = include_entropy;
  opts.alpha = oracle.alpha;
  Table log_pi(policy.rows(), policy.cols());
  for (std::size_t i = 0; i < policy.size(); ++i) log_pi.flat()[i] = std::log(policy.flat()[i]);
  std::size_t agree = 0;
  for (std::size_t s = 0; s < policy.rows(); ++s) {
    auto first_max = [](std::span<const double> row) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < row.size(); ++a)
        if (row[a] > row[best]) best = a;
      return best;
    };
    if (first_max(policy.row(s)) == first_max(oracle.pi_star.row(s))) ++agree;
  }
  return {
      {"argmax_agreement", static_cast<double>(agree) / static_cast<double>(policy.rows())},
      {"kl_to_optimal", kl_to_optimal(oracle.pi_star, log_pi)},
      {"oracle_return", policy_return(mdp, oracle.pi_star, opts)},
      {"policy_return", policy_return(mdp, policy, opts)},
  };
}

MethodOutput run_method(const ExperimentConfig& c, const TabularMDP& mdp, const SoftSolution& oracle,
                        const DataArtifacts& data) {
  MethodOutput out;
  const std::size_t S = mdp.num_states;
  const std::size_t A = mdp.num_actions;
  switch (c.method.name) {
    case MethodName::cpl: {
      TrainingData td;
      td.preferences = data.dataset;
      td.batch = data.batch;
      LossConfig loss = c.method.loss;
      if (loss.variant == LossVariant::bc_reg) td.bc_data = dataset_steps(data.dataset);
      if (loss.variant == LossVariant::kl_biased) {
        OptimizerConfig ref = c.optimizer;
        ref.steps = c.method.reference_steps;
        loss.reference_log_policy =
            bc_pretrain(zero_logits(S, A), dataset_steps(data.dataset), ref).policy.log_policy();
      }
      EvalTarget eval{&mdp, &oracle, c.eval_every, c.include_entropy};
      TrainResult r = train(zero_logits(S, A), td, loss, c.optimizer, eval);
      out.policy = std::move(r.policy);
      out.trace = std::move(r.trace);
      return out;
    }
    case MethodName::sft: {
      SftResult r = sft(data.dataset, S, A, c.optimizer);
      out.policy = std::move(r.policy);
      out.trace = std::move(r.trace);
      break;
    }
    case MethodName::percent_bc:
    case MethodName::bc: {
      if (data.rollouts.empty()) throw ParameterError("behavior cloning needs rollouts");
      const double fraction = c.method.name == MethodName::bc ? 1.0 : c.method.bc_fraction;
      PercentBcResult r = percent_bc(data.rollouts, fraction, mdp, mdp.discount, c.optimizer);
      out.policy = std::move(r.policy);
      out.trace = std::move(r.trace);
      break;
    }
    case MethodName::naive: {
      NaiveResult r = naive_advantage_mle(data.dataset, S, A, c.method.loss, c.optimizer);
      out.policy = std::move(r.policy);
      out.trace = std::move(r.trace);
      out.advantage = std::move(r.advantage);
      break;
    }
  }
  if (!out.trace.records.empty()) {
    const auto m = evaluate(out.policy.policy(), mdp, oracle, c.include_entropy);
    out.trace.records.back().kl_to_optimal = m.at("kl_to_optimal");
    out.trace.records.back().policy_return = m.at("policy_return");
  }
  return out;
}

std::string ResultRecord::to_json() const {
  json j = {{"config_hash", config_hash},   {"dataset_hash", dataset_hash},
            {"metrics", json(metrics)},     {"output_dir", output_dir},
            {"trace_path", trace_path},     {"wall_time", wall_time}};
  return j.dump(2) + "\n";
}

void write_policy_json(std::ostream& out, const PolicyLogits& policy) {
  json j = {{"logits", policy.logits.to_rows()}, {"policy", policy.policy().to_rows()}};
  out << j.dump() << '\n';
}

Table read_policy_json(std::istream& in) {
  try {
    const json j = json::parse(in);
    Table pi = Table::from_rows(j.at("policy").get<std::vector<std::vector<double>>>());
    for (std::size_t s = 0; s < pi.rows(); ++s) {
      double total = 0.0;
      for (double p : pi.row(s)) {
        if (!(p >= 0.0)) throw ParameterError("policy row " + std::to_string(s) + " has a negative entry");
        total += p;
      }
      if (!(std::abs(total - 1.0) <= 1e-9))
        throw ParameterError("policy row " + std::to_string(s) + " does not sum to 1");
    }
    return pi;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed policy file: ") + e.what());
  }
}

Table load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open policy file " + path);
  return read_policy_json(in);
}

namespace {

struct Prepared {
  ExperimentConfig config;
  TabularMDP mdp;
  SoftSolution oracle;
  fs::path dir;
  std::string config_hash;
};

Prepared prepare(const ConfigMap& map) {
  Prepared p;
  p.config = resolve_config(map);
  p.mdp = in_stage("env", [&] {
    TabularMDP m = build_environment(p.config);
    require_valid(m);
    return m;
  });
  p.oracle = in_stage("oracle", [&] { return solve_oracle(p.config, p.mdp); });
  p.dir = p.config.output_dir;
  const std::string copy = p.config.source.render();
  p.config_hash = git_blob_hash(copy);
  in_stage("output", [&] {
    fs::create_directories(p.dir);
    write_file(p.dir / "config.copy", copy);
    return 0;
  });
  return p;
}

ResultRecord finish(const Prepared& p, const DataArtifacts& data, const std::string& dataset_hash,
                    std::chrono::steady_clock::time_point start) {
  const MethodOutput method =
      in_stage("train", [&] { return run_method(p.config, p.mdp, p.oracle, data); });
  ResultRecord rec;
  rec.config_hash = p.config_hash;
  rec.dataset_hash = dataset_hash;
  rec.output_dir = p.dir.string();
  rec.trace_path = (p.dir / "trace.csv").string();
  rec.metrics = in_stage("eval", [&] {
    auto m = evaluate(method.policy.policy(), p.mdp, p.oracle, p.config.include_entropy);
    const auto& last = method.trace.records.back();
    m["loss"] = last.loss;
    m["accuracy"] = last.accuracy;
    return m;
  });
  in_stage("output", [&] {
    std::ostringstream trace;
    method.trace.write_csv(trace);
    write_file(rec.trace_path, trace.str());
    std::string metrics = "metric,value\n";
    for (const auto& [k, v] : rec.metrics) metrics += k + "," + number(v) + "\n";
    write_file(p.dir / "metrics.csv", metrics);
    std::ostringstream policy;
    write_policy_json(policy, method.policy);
    write_file(p.dir / "policy.json", policy.str());
    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(p.dir / "result.json", rec.to_json());
    return 0;
  });
  return rec;
}

}  // namespace

ResultRecord run_experiment(const ConfigMap& config) {
  const auto start = std::chrono::steady_clock::now();
  const Prepared p = prepare(config);
  const DataArtifacts data = in_stage("data", [&] { return generate_data(p.config, p.mdp, p.oracle); });
  const std::string bytes = dataset_to_string(data.dataset);
  in_stage("output", [&] {
    write_file(p.dir / "dataset.jsonl", bytes);
    return 0;
  });
  return finish(p, data, git_blob_hash(bytes), start);
}

std::string generate_dataset_files(const ConfigMap& config) {
  const Prepared p = prepare(config);
  const DataArtifacts data = in_stage("data", [&] { return generate_data(p.config, p.mdp, p.oracle); });
  const std::string bytes = dataset_to_string(data.dataset);
  in_stage("output", [&] {
    write_file(p.dir / "dataset.jsonl", bytes);
    return 0;
  });
  return git_blob_hash(bytes);
}

ResultRecord train_from_dataset(const ConfigMap& config, const std::string& dataset_path) {
  const auto start = std::chrono::steady_clock::now();
  const Prepared p = prepare(config);
  const std::string bytes = in_stage("data", [&] { return read_file(dataset_path); });
  DataArtifacts data = in_stage("data", [&] {
    DataArtifacts d = generate_data(p.config, p.mdp, p.oracle);
    std::istringstream in(bytes);
    d.dataset = read_dataset(in);
    if (wants_batch(p.config)) {
      std::vector<Segment> segments;
      for (const Segment* seg : d.dataset.all_segments()) segments.push_back(*seg);
      d.batch = score_batch(segments, make_scorer(p.config, p.mdp, p.oracle));
    }
    return d;
  });
  return finish(p, data, git_blob_hash(bytes), start);
}

std::map<std::string, double> evaluate_policy_file(const ConfigMap& config,
                                                   const std::string& policy_path) {
  const ExperimentConfig c = resolve_config(config);
  const TabularMDP mdp = in_stage("env", [&] { return build_environment(c); });
  const SoftSolution oracle = in_stage("oracle", [&] { return solve_oracle(c, mdp); });
  return in_stage("eval", [&] { return evaluate(load_policy(policy_path), mdp, oracle, c.include_entropy); });
}

std::vector<ResultRecord> sweep(const ConfigMap& base, const std::string& axis,
                                std::span<const std::string> values) {
  const FieldSpec* f = find_field(axis);
  if (!f) throw ParameterError("sweep axis '" + axis + "' is not a config key");
  if (!f->scalar() || axis == "output.dir")
    throw ParameterError("sweep axis '" + axis + "' is not a scalar field");
  if (values.empty()) throw ParameterError("sweep needs at least one value");
  const fs::path root = base.get("output.dir");
  std::vector<ResultRecord> records;
  for (const auto& value : values) {
    ConfigMap run = base;
    run.set(axis, value);
    run.set("output.dir", (root / (axis + "=" + value)).string());
    records.push_back(run_experiment(run));
  }
  std::string csv = "value,config_hash,dataset_hash";
  for (const auto& [k, v] : records.front().metrics) csv += "," + k;
  csv += "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    csv += values[i] + "," + records[i].config_hash + "," + records[i].dataset_hash;
    for (const auto& [k, v] : records[i].metrics) csv += "," + number(v);
    csv += "\n";
  }
  fs::create_directories(root);
  write_file(root / "sweep.csv", csv);
  return records;
}

}  // namespace cpl
