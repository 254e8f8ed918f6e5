// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/config.hpp"

#include "cpl/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cpl {

namespace {

FieldSpec field(std::string key, FieldType type, std::string def, std::string help,
                std::vector<std::string> choices = {}) {
  FieldSpec f;
  f.key = std::move(key);
  f.type = type;
  f.default_value = std::move(def);
  f.help = std::move(help);
  f.choices = std::move(choices);
  return f;
}

FieldSpec required(std::string key, FieldType type, std::string help) {
  FieldSpec f = field(std::move(key), type, "", std::move(help));
  f.required = true;
  return f;
}

std::vector<FieldSpec> make_schema() {
  using T = FieldType;
  std::vector<FieldSpec> s = {
      field("env.kind", T::choice, "gridworld", "environment family",
            {"gridworld", "bandit", "file", "random"}),
      field("env.width", T::integer, "4", "gridworld width"),
      field("env.height", T::integer, "4", "gridworld height"),
      field("env.goal_x", T::integer, "3", "gridworld goal column"),
      field("env.goal_y", T::integer, "3", "gridworld goal row"),
      field("env.step_reward", T::real, "0", "gridworld reward per non-goal step"),
      field("env.goal_reward", T::real, "1", "gridworld reward for entering the goal"),
      field("env.slip_prob", T::real, "0", "probability of a uniformly random action"),
      field("env.gamma", T::real, "0.9", "MDP discount"),
      field("env.rewards", T::real_list, "1,0,0", "bandit action rewards"),
      field("env.path", T::path, "", "MDP JSON file (kind = file)"),
      field("env.num_states", T::integer, "5", "random MDP states"),
      field("env.num_actions", T::integer, "3", "random MDP actions"),
      field("env.seed", T::integer, "0", "random MDP instance seed"),
      field("oracle.alpha", T::real, "0.1", "MaxEnt temperature of the labeling oracle"),
      field("oracle.tol", T::real, "1e-10", "soft value iteration tolerance"),
      field("oracle.max_iters", T::integer, "1000000", "soft value iteration budget"),
      field("data.num_rollouts", T::integer, "20", "rollouts collected"),
      field("data.horizon", T::integer, "20", "steps per rollout"),
      field("data.rollout_policy", T::choice, "epsilon_oracle", "behavior policy",
            {"epsilon_oracle", "uniform", "file"}),
      field("data.epsilon", T::real, "0.3", "uniform mixing weight for epsilon_oracle"),
      field("data.policy_path", T::path, "", "policy JSON (rollout_policy = file)"),
      field("data.segment_source", T::choice, "rollouts", "where segments come from",
            {"rollouts", "exhaustive"}),
      field("data.segment_length", T::integer, "4", "steps per segment"),
      field("data.num_segments", T::integer, "40", "segments sampled from rollouts"),
      field("data.density", T::choice, "sparse", "all pairs or random matchings",
            {"dense", "sparse"}),
      field("data.comparisons_per_segment", T::integer, "1", "matchings per segment (sparse)"),
      field("data.label_mode", T::choice, "sampled", "how labels are drawn",
            {"sampled", "argmax", "soft"}),
      field("data.preference_model", T::choice, "regret", "labeling model",
            {"regret", "partial_return"}),
      field("data.estimator", T::choice, "exact", "regret estimator",
            {"exact", "telescoped"}),
      field("data.score_gamma", T::optional_real, "", "labeling discount (default env.gamma)"),
      field("data.ranking_size", T::integer, "0", "segments per ranking group; 0 = pairs"),
      field("method.name", T::choice, "cpl", "training method",
            {"cpl", "sft", "percent_bc", "naive", "bc"}),
      field("method.variant", T::choice, "biased", "CPL loss variant",
            {"vanilla", "biased", "bc_reg", "kl_biased", "ranking", "dense_batch"}),
      field("method.alpha", T::real, "0.1", "temperature inside the loss"),
      field("method.lambda", T::real, "0.5", "negative-segment weight"),
      field("method.beta", T::real, "0", "BC weight (bc_reg)"),
      field("method.gamma", T::real, "1", "discount inside training scores"),
      field("method.label_mode", T::choice, "hard", "training targets", {"hard", "soft"}),
      field("method.reduction", T::choice, "mean", "pair reduction", {"mean", "sum"}),
      field("method.bc_fraction", T::real, "0.1", "kept fraction (percent_bc)"),
      field("method.reference_steps", T::integer, "500", "BC steps for the kl_biased reference"),
      field("optimizer.method", T::choice, "adaptive_moment", "first-order method",
            {"gradient_descent", "momentum", "adaptive_moment"}),
      field("optimizer.learning_rate", T::real, "0.01", "step size"),
      field("optimizer.steps", T::integer, "5000", "step budget"),
      field("optimizer.pretrain_steps", T::integer, "0", "BC pretraining steps"),
      field("optimizer.convergence_tol", T::real, "1e-8", "gradient sup-norm stop"),
      field("optimizer.batch_size", T::integer, "0", "minibatch size; 0 = full batch"),
      field("eval.eval_every", T::integer, "0", "trace evaluation period; 0 = final only"),
      field("eval.include_entropy", T::boolean, "false", "add the entropy bonus to returns"),
      field("output.dir", T::path, "out", "output directory"),
      required("run.seed", T::integer, "root seed for every random stream"),
  };
  std::sort(s.begin(), s.end(), [](const FieldSpec& a, const FieldSpec& b) { return a.key < b.key; });
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_real(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_uint(std::string_view s, std::uint64_t& out) {
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

std::vector<double> parse_list(std::string_view s, bool& ok) {
  std::vector<double> out;
  ok = true;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item =
        trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    double v = 0.0;
    if (!parse_real(item, v)) {
      ok = false;
      return {};
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_value(const FieldSpec& f, const std::string& value) {
  auto fail = [&](const std::string& why) {
    throw ConfigError(f.key + ": " + why + " (got '" + value + "')");
  };
  switch (f.type) {
    case FieldType::integer: {
      std::uint64_t v = 0;
      if (!parse_uint(value, v)) fail("expected a non-negative integer");
      break;
    }
    case FieldType::real: {
      double v = 0.0;
      if (!parse_real(value, v)) fail("expected a finite real number");
      break;
    }
    case FieldType::optional_real: {
      double v = 0.0;
      if (!value.empty() && !parse_real(value, v)) fail("expected a real number or nothing");
      break;
    }
    case FieldType::boolean:
      if (value != "true" && value != "false") fail("expected true or false");
      break;
    case FieldType::choice:
      if (std::find(f.choices.begin(), f.choices.end(), value) == f.choices.end()) {
        std::string list;
        for (const auto& c : f.choices) list += (list.empty() ? "" : ", ") + c;
        fail("expected one of {" + list + "}");
      }
      break;
    case FieldType::real_list: {
      bool ok = false;
      parse_list(value, ok);
      if (!ok) fail("expected a comma-separated list of reals");
      break;
    }
    case FieldType::path:
      break;
  }
}

}  // namespace

const std::vector<FieldSpec>& config_schema() {
  static const std::vector<FieldSpec> schema = make_schema();
  return schema;
}

const FieldSpec* find_field(std::string_view key) {
  for (const auto& f : config_schema())
    if (f.key == key) return &f;
  return nullptr;
}

ConfigMap ConfigMap::parse(std::string_view text, std::string_view origin) {
  ConfigMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (m.has(key))
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": duplicate key " + key);
    m.set(key, trim(std::string_view(t).substr(eq + 1)));
  }
  return m;
}

ConfigMap ConfigMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  const FieldSpec* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  check_value(*f, value);
  values_[key] = value;
}

std::string ConfigMap::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const FieldSpec* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  if (f->required) throw ConfigError(key + ": required key is missing");
  return f->default_value;
}

ConfigMap ConfigMap::resolved() const {
  ConfigMap out;
  for (const auto& f : config_schema()) out.values_[f.key] = get(f.key);
  return out;
}

std::string ConfigMap::render() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string config_template() {
  std::string out = "# cpl experiment configuration. Unknown keys are rejected.\n";
  std::string section;
  for (const auto& f : config_schema()) {
    const std::string sec = f.key.substr(0, f.key.find('.'));
    if (sec != section) {
      out += "\n";
      section = sec;
    }
    out += "# " + f.help;
    if (!f.choices.empty()) {
      out += " {";
      for (std::size_t i = 0; i < f.choices.size(); ++i) out += (i ? "|" : "") + f.choices[i];
      out += "}";
    }
    out += f.required ? " (required)\n" : "\n";
    out += f.key + " = " + (f.required ? "0" : f.default_value) + "\n";
  }
  return out;
}

std::string_view to_string(EnvKind k) noexcept {
  switch (k) {
    case EnvKind::gridworld: return "gridworld";
    case EnvKind::bandit: return "bandit";
    case EnvKind::file: return "file";
    case EnvKind::random: return "random";
  }
  return "gridworld";
}

std::string_view to_string(MethodName m) noexcept {
  switch (m) {
    case MethodName::cpl: return "cpl";
    case MethodName::sft: return "sft";
    case MethodName::percent_bc: return "percent_bc";
    case MethodName::naive: return "naive";
    case MethodName::bc: return "bc";
  }
  return "cpl";
}

namespace {

class Reader {
 public:
  explicit Reader(const ConfigMap& m) : m_(m) {}

  std::string str(const std::string& key) const { return m_.get(key); }
  double real(const std::string& key) const {
    double v = 0.0;
    parse_real(m_.get(key), v);
    return v;
  }
  std::uint64_t u64(const std::string& key) const {
    std::uint64_t v = 0;
    parse_uint(m_.get(key), v);
    return v;
  }
  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }
  bool flag(const std::string& key) const { return m_.get(key) == "true"; }
  std::vector<double> list(const std::string& key) const {
    bool ok = false;
    return parse_list(m_.get(key), ok);
  }

 private:
  const ConfigMap& m_;
};

void require(bool cond, const std::string& key, const std::string& why) {
  if (!cond) throw ConfigError(key + ": " + why);
}

}  // namespace

ExperimentConfig resolve_config(const ConfigMap& config) {
  ExperimentConfig c;
  c.source = config.resolved();
  const Reader r(c.source);

  const std::string kind = r.str("env.kind");
  c.env.kind = kind == "gridworld" ? EnvKind::gridworld
               : kind == "bandit"  ? EnvKind::bandit
               : kind == "file"    ? EnvKind::file
                                   : EnvKind::random;
  c.env.gamma = r.real("env.gamma");
  require(c.env.gamma >= 0.0 && c.env.gamma < 1.0, "env.gamma", "must lie in [0, 1)");
  c.env.grid.width = r.size("env.width");
  c.env.grid.height = r.size("env.height");
  c.env.grid.goal = {r.size("env.goal_x"), r.size("env.goal_y")};
  c.env.grid.step_reward = r.real("env.step_reward");
  c.env.grid.goal_reward = r.real("env.goal_reward");
  c.env.grid.slip_prob = r.real("env.slip_prob");
  c.env.grid.gamma = c.env.gamma;
  c.env.rewards = r.list("env.rewards");
  c.env.path = r.str("env.path");
  c.env.num_states = r.size("env.num_states");
  c.env.num_actions = r.size("env.num_actions");
  c.env.seed = r.u64("env.seed");
  if (c.env.kind == EnvKind::gridworld) {
    require(c.env.grid.width > 0 && c.env.grid.height > 0, "env.width", "grid must be non-empty");
    require(c.env.grid.goal.x < c.env.grid.width, "env.goal_x", "outside the grid");
    require(c.env.grid.goal.y < c.env.grid.height, "env.goal_y", "outside the grid");
    require(c.env.grid.slip_prob >= 0.0 && c.env.grid.slip_prob <= 1.0, "env.slip_prob",
            "must lie in [0, 1]");
  }
  if (c.env.kind == EnvKind::file) {
    require(!c.env.path.empty(), "env.path", "required when env.kind = file");
    require(std::filesystem::exists(c.env.path), "env.path", "file does not exist: " + c.env.path);
  }
  if (c.env.kind == EnvKind::random) {
    require(c.env.num_states > 0, "env.num_states", "must be positive");
    require(c.env.num_actions > 0, "env.num_actions", "must be positive");
  }

  c.oracle_alpha = r.real("oracle.alpha");
  require(c.oracle_alpha > 0.0, "oracle.alpha", "must be positive");
  c.solver.tol = r.real("oracle.tol");
  require(c.solver.tol > 0.0, "oracle.tol", "must be positive");
  c.solver.max_iters = r.size("oracle.max_iters");

  auto& d = c.data;
  d.num_rollouts = r.size("data.num_rollouts");
  d.horizon = r.size("data.horizon");
  const std::string rp = r.str("data.rollout_policy");
  d.rollout_policy = rp == "epsilon_oracle" ? RolloutPolicy::epsilon_oracle
                     : rp == "uniform"      ? RolloutPolicy::uniform
                                            : RolloutPolicy::file;
  d.epsilon = r.real("data.epsilon");
  require(d.epsilon >= 0.0 && d.epsilon <= 1.0, "data.epsilon", "must lie in [0, 1]");
  d.policy_path = r.str("data.policy_path");
  if (d.rollout_policy == RolloutPolicy::file) {
    require(!d.policy_path.empty(), "data.policy_path", "required when rollout_policy = file");
    require(std::filesystem::exists(d.policy_path), "data.policy_path",
            "file does not exist: " + d.policy_path);
  }
  d.segment_source =
      r.str("data.segment_source") == "exhaustive" ? SegmentSource::exhaustive : SegmentSource::rollouts;
  d.segment_length = r.size("data.segment_length");
  d.num_segments = r.size("data.num_segments");
  if (d.segment_source == SegmentSource::rollouts) {
    require(d.segment_length > 0, "data.segment_length", "must be positive");
    require(d.horizon >= d.segment_length, "data.horizon", "shorter than data.segment_length");
    require(d.num_rollouts > 0, "data.num_rollouts", "must be positive");
    require(d.num_segments >= 2, "data.num_segments", "need at least 2 segments");
  }
  d.density = parse_density(r.str("data.density"));
  d.comparisons_per_segment = r.size("data.comparisons_per_segment");
  require(d.comparisons_per_segment > 0, "data.comparisons_per_segment", "must be positive");
  d.label_mode = parse_label_mode(r.str("data.label_mode"));
  d.preference_model = parse_preference_model(r.str("data.preference_model"));
  d.estimator = parse_regret_estimator(r.str("data.estimator"));
  if (!r.str("data.score_gamma").empty()) {
    d.score_gamma = r.real("data.score_gamma");
    require(*d.score_gamma >= 0.0 && *d.score_gamma <= 1.0, "data.score_gamma",
            "must lie in [0, 1]");
  }
  d.ranking_size = r.size("data.ranking_size");
  require(d.ranking_size != 1, "data.ranking_size", "groups need at least 2 segments");
  if (d.ranking_size > 0)
    require(d.label_mode != LabelMode::soft, "data.label_mode", "rankings cannot use soft labels");

  const std::string name = r.str("method.name");
  c.method.name = name == "cpl"          ? MethodName::cpl
                  : name == "sft"        ? MethodName::sft
                  : name == "percent_bc" ? MethodName::percent_bc
                  : name == "naive"      ? MethodName::naive
                                         : MethodName::bc;
  auto& loss = c.method.loss;
  loss.variant = parse_loss_variant(r.str("method.variant"));
  loss.alpha = r.real("method.alpha");
  loss.lambda = r.real("method.lambda");
  loss.beta = r.real("method.beta");
  loss.gamma = r.real("method.gamma");
  loss.label_mode = parse_train_label_mode(r.str("method.label_mode"));
  loss.reduction = parse_reduction(r.str("method.reduction"));
  require(loss.alpha > 0.0, "method.alpha", "must be positive");
  require(loss.lambda > 0.0 && loss.lambda <= 1.0, "method.lambda", "must lie in (0, 1]");
  require(loss.gamma >= 0.0 && loss.gamma <= 1.0, "method.gamma", "must lie in [0, 1]");
  if (c.method.name == MethodName::cpl && loss.variant == LossVariant::bc_reg)
    require(loss.beta > 0.0, "method.beta", "bc_reg requires beta > 0");
  if (c.method.name == MethodName::cpl) {
    const bool ranking = loss.variant == LossVariant::ranking;
    require(ranking == (d.ranking_size > 0), "method.variant",
            ranking ? "ranking requires data.ranking_size >= 2"
                    : "data.ranking_size > 0 requires the ranking variant");
  } else {
    require(d.ranking_size == 0, "data.ranking_size", "baselines need a pair dataset");
  }
  if (c.method.name == MethodName::sft)
    require(d.label_mode != LabelMode::soft, "data.label_mode", "sft needs hard-oriented pairs");
  c.method.bc_fraction = r.real("method.bc_fraction");
  require(c.method.bc_fraction > 0.0 && c.method.bc_fraction <= 1.0, "method.bc_fraction",
          "must lie in (0, 1]");
  c.method.reference_steps = r.size("method.reference_steps");

  auto& o = c.optimizer;
  o.method = parse_optimizer_method(r.str("optimizer.method"));
  o.learning_rate = r.real("optimizer.learning_rate");
  require(o.learning_rate > 0.0, "optimizer.learning_rate", "must be positive");
  o.steps = r.size("optimizer.steps");
  o.pretrain_steps = r.size("optimizer.pretrain_steps");
  o.convergence_tol = r.real("optimizer.convergence_tol");
  require(o.convergence_tol >= 0.0, "optimizer.convergence_tol", "must be non-negative");
  o.batch_size = r.size("optimizer.batch_size");

  c.eval_every = r.size("eval.eval_every");
  c.include_entropy = r.flag("eval.include_entropy");
  c.output_dir = r.str("output.dir");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
  c.seed = r.u64("run.seed");
  o.seed = Rng(c.seed).derive("train").key();
  return c;
}

std::string git_blob_hash(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("cannot allocate digest context");
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace cpl
