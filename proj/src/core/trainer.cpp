// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/trainer.hpp"

#include "cpl/error.hpp"
#include "cpl/rng.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace cpl {

PolicyLogits zero_logits(std::size_t num_states, std::size_t num_actions) {
  return PolicyLogits{Table(num_states, num_actions)};
}

std::string_view to_string(OptimizerMethod m) noexcept {
  switch (m) {
    case OptimizerMethod::gradient_descent: return "gradient_descent";
    case OptimizerMethod::momentum: return "momentum";
    case OptimizerMethod::adaptive_moment: return "adaptive_moment";
  }
  return "adaptive_moment";
}

OptimizerMethod parse_optimizer_method(std::string_view s) {
  if (s == "gradient_descent") return OptimizerMethod::gradient_descent;
  if (s == "momentum") return OptimizerMethod::momentum;
  if (s == "adaptive_moment") return OptimizerMethod::adaptive_moment;
  throw ParameterError("unknown optimizer method '" + std::string(s) + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ParameterError("learning_rate must be positive");
  if (!(convergence_tol >= 0.0)) throw ParameterError("convergence_tol must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ParameterError("adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ParameterError("adam epsilon must be positive");
}

void TrainTrace::write_csv(std::ostream& out) const {
  out << "step,loss,grad_norm,accuracy,kl_to_optimal,policy_return\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (const auto& r : records) {
    line.str("");
    line << r.step << ',' << r.loss << ',' << r.grad_norm << ',' << r.accuracy << ',';
    if (r.kl_to_optimal) line << *r.kl_to_optimal;
    line << ',';
    if (r.policy_return) line << *r.policy_return;
    out << line.str() << '\n';
  }
}

namespace {

void require_finite(const LossOutput& out, std::size_t step) {
  bool ok = std::isfinite(out.loss);
  for (double g : out.grad.flat()) ok = ok && std::isfinite(g);
  if (!ok) {
    std::ostringstream msg;
    msg << "non-finite loss or gradient at step " << step << " (loss = " << out.loss << ")";
    throw TrainingError(msg.str());
  }
}

TraceRecord make_record(std::size_t step, const LossOutput& out) {
  TraceRecord r;
  r.step = step;
  r.loss = out.loss;
  r.grad_norm = sup_norm(out.grad.flat());
  r.accuracy = out.accuracy;
  return r;
}

}  // namespace

TrainTrace minimize(Table& params, const Objective& objective, const OptimizerConfig& config,
                    const RecordHook& hook) {
  config.validate();
  TrainTrace trace;
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  double b1_pow = 1.0;
  double b2_pow = 1.0;
  auto emit = [&](TraceRecord record) {
    if (hook) hook(record, params);
    trace.records.push_back(record);
  };
  std::size_t step = 0;
  for (; step < config.steps; ++step) {
    const LossOutput out = objective(params, step);
    require_finite(out, step);
    if (!out.grad.same_shape(params)) throw Error("objective returned a gradient of the wrong shape");
    TraceRecord record = make_record(step, out);
    if (record.grad_norm < config.convergence_tol) {
      trace.converged = true;
      emit(record);
      trace.steps_taken = step;
      return trace;
    }
    emit(record);
    auto p = params.flat();
    auto g = out.grad.flat();
    switch (config.method) {
      case OptimizerMethod::gradient_descent:
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * g[i];
        break;
      case OptimizerMethod::momentum:
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = config.momentum * m[i] + g[i];
          p[i] -= config.learning_rate * m[i];
        }
        break;
      case OptimizerMethod::adaptive_moment: {
        b1_pow *= config.beta1;
        b2_pow *= config.beta2;
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
          v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
          const double mhat = m[i] / (1.0 - b1_pow);
          const double vhat = v[i] / (1.0 - b2_pow);
          p[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
        }
        break;
      }
    }
  }
  const LossOutput out = objective(params, step);
  require_finite(out, step);
  TraceRecord record = make_record(step, out);
  trace.converged = record.grad_norm < config.convergence_tol;
  emit(record);
  trace.steps_taken = step;
  return trace;
}

TrainResult bc_pretrain(const PolicyLogits& init, std::span<const StateAction> data,
                        const OptimizerConfig& config) {
  if (data.empty()) throw ParameterError("bc_pretrain: empty data");
  TrainResult result{init, {}};
  const std::vector<StateAction> copy(data.begin(), data.end());
  result.trace = minimize(
      result.policy.logits,
      [&copy](const Table& logits, std::size_t) {
        return behavior_cloning_loss(row_log_softmax(logits), copy);
      },
      config);
  return result;
}

namespace {

std::vector<StateAction> dataset_steps(const PreferenceDataset& dataset) {
  std::vector<StateAction> out;
  for (const Segment* seg : dataset.all_segments())
    for (const auto& step : seg->steps) out.push_back(step);
  return out;
}

bool pair_variant(LossVariant v) {
  return v == LossVariant::vanilla || v == LossVariant::biased || v == LossVariant::bc_reg ||
         v == LossVariant::kl_biased;
}

}  // namespace

TrainResult train(const PolicyLogits& init, const TrainingData& data, const LossConfig& loss,
                  const OptimizerConfig& config, const std::optional<EvalTarget>& eval) {
  loss.validate();
  config.validate();
  for (double x : init.logits.flat())
    if (!std::isfinite(x)) throw ParameterError("initial logits must be finite");
  TrainResult result{init, {}};
  if (config.pretrain_steps > 0) {
    const std::vector<StateAction> bc =
        data.bc_data.empty() ? dataset_steps(data.preferences) : data.bc_data;
    OptimizerConfig pre = config;
    pre.steps = config.pretrain_steps;
    result.policy = bc_pretrain(result.policy, bc, pre).policy;
  }

  const bool minibatch = config.batch_size > 0 && loss.variant != LossVariant::dense_batch;
  const Rng sampler = Rng(config.seed).derive("minibatch");
  Objective objective = [&](const Table& logits, std::size_t step) {
    if (!minibatch) return evaluate_objective(logits, data, loss);
    Rng rng = sampler.split(step);
    TrainingData sub;
    sub.bc_data = data.bc_data;
    sub.preferences.meta = data.preferences.meta;
    if (pair_variant(loss.variant)) {
      const auto& pairs = data.preferences.pairs;
      if (pairs.empty()) throw ParameterError("preference dataset has no pairs");
      for (std::size_t i = 0; i < config.batch_size; ++i)
        sub.preferences.pairs.push_back(pairs[rng.below(pairs.size())]);
    } else {
      const auto& groups = data.preferences.rankings;
      if (groups.empty()) throw ParameterError("ranking dataset has no groups");
      for (std::size_t i = 0; i < config.batch_size; ++i)
        sub.preferences.rankings.push_back(groups[rng.below(groups.size())]);
    }
    return evaluate_objective(logits, sub, loss);
  };

  RecordHook hook;
  if (eval && eval->mdp && eval->oracle) {
    const std::size_t last = config.steps;
    hook = [&, last](TraceRecord& record, const Table& logits) {
      const bool due = record.step == last || (eval->every > 0 && record.step % eval->every == 0);
      if (!due) return;
      const Table log_pi = row_log_softmax(logits);
      record.kl_to_optimal = kl_to_optimal(eval->oracle->pi_star, log_pi);
      ReturnOptions opts;
      opts.include_entropy = eval->include_entropy;
      opts.alpha = eval->oracle->alpha;
      record.policy_return = policy_return(*eval->mdp, row_softmax(logits), opts);
    };
  }
  result.trace = minimize(result.policy.logits, objective, config, hook);
  if (eval && eval->mdp && eval->oracle && !result.trace.records.empty()) {
    auto& back = result.trace.records.back();
    if (!back.kl_to_optimal) {
      const Table log_pi = result.policy.log_policy();
      back.kl_to_optimal = kl_to_optimal(eval->oracle->pi_star, log_pi);
      ReturnOptions opts;
      opts.include_entropy = eval->include_entropy;
      opts.alpha = eval->oracle->alpha;
      back.policy_return = policy_return(*eval->mdp, result.policy.policy(), opts);
    }
  }
  return result;
}

double gradient_check(const Table& params,
                      const std::function<LossOutput(const Table&)>& objective, double h) {
  if (params.size() > 500) throw SizeError("gradient_check: more than 500 coordinates");
  const LossOutput base = objective(params);
  Table probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double x = params.flat()[i];
    probe.flat()[i] = x + h;
    const double up = objective(probe).loss;
    probe.flat()[i] = x - h;
    const double down = objective(probe).loss;
    probe.flat()[i] = x;
    const double fd = (up - down) / (2.0 * h);
    const double a = base.grad.flat()[i];
    worst = std::max(worst, std::abs(a - fd) / (std::abs(a) + 1e-8));
  }
  return worst;
}

double gradient_check(const Table& logits, const TrainingData& data, const LossConfig& loss,
                      double h) {
  return gradient_check(
      logits, [&](const Table& x) { return evaluate_objective(x, data, loss); }, h);
}

double kl_to_optimal(const Table& pi_star, const Table& log_policy) {
  if (!pi_star.same_shape(log_policy)) throw ParameterError("kl_to_optimal: shape mismatch");
  if (pi_star.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < pi_star.rows(); ++s)
    for (std::size_t a = 0; a < pi_star.cols(); ++a) {
      const double p = pi_star(s, a);
      if (p > 0.0) total += p * (std::log(p) - log_policy(s, a));
    }
  return total / static_cast<double>(pi_star.rows());
}

double estimate_smoothness(const std::function<LossOutput(const Table&)>& objective,
                           const Table& center, std::size_t samples, double radius,
                           std::uint64_t seed) {
  Rng rng = Rng(seed).derive("smoothness");
  constexpr double kStep = 1e-4;
  double worst = 0.0;
  Table x = center;
  Table y = center;
  for (std::size_t n = 0; n < samples; ++n) {
    for (std::size_t i = 0; i < x.size(); ++i)
      x.flat()[i] = center.flat()[i] + radius * (2.0 * rng.uniform() - 1.0);
    std::vector<double> dir(x.size());
    double norm = 0.0;
    for (double& d : dir) {
      d = 2.0 * rng.uniform() - 1.0;
      norm += d * d;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t i = 0; i < x.size(); ++i) y.flat()[i] = x.flat()[i] + kStep * dir[i] / norm;
    const LossOutput gx = objective(x);
    const LossOutput gy = objective(y);
    double diff = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = gy.grad.flat()[i] - gx.grad.flat()[i];
      diff += d * d;
    }
    worst = std::max(worst, std::sqrt(diff) / kStep);
  }
  return worst;
}

}  // namespace cpl
