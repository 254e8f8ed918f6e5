// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/cpl.h"

#include "cpl/config.hpp"
#include "cpl/error.hpp"
#include "cpl/experiment.hpp"
#include "cpl/mdp.hpp"
#include "cpl/oracle.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

struct cpl_mdp {
  cpl::TabularMDP mdp;
};
struct cpl_solution {
  cpl::SoftSolution solution;
};
struct cpl_config {
  cpl::ConfigMap map;
};
struct cpl_result {
  cpl::ResultRecord record;
};

namespace {

thread_local std::string g_last_error;

cpl_status fail(cpl_status status, const char* what) {
  g_last_error = what;
  return status;
}

template <class F>
cpl_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CPL_OK;
  } catch (const cpl::StageError& e) {
    return fail(CPL_ERR_STAGE, e.what());
  } catch (const cpl::ParameterError& e) {
    return fail(CPL_ERR_PARAMETER, e.what());
  } catch (const cpl::SolverError& e) {
    return fail(CPL_ERR_SOLVER, e.what());
  } catch (const cpl::ConsistencyError& e) {
    return fail(CPL_ERR_CONSISTENCY, e.what());
  } catch (const cpl::ContractError& e) {
    return fail(CPL_ERR_CONTRACT, e.what());
  } catch (const cpl::SizeError& e) {
    return fail(CPL_ERR_SIZE, e.what());
  } catch (const cpl::ConfigError& e) {
    return fail(CPL_ERR_CONFIG, e.what());
  } catch (const cpl::IoError& e) {
    return fail(CPL_ERR_IO, e.what());
  } catch (const cpl::TrainingError& e) {
    return fail(CPL_ERR_TRAINING, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CPL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CPL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CPL_ERR_INTERNAL, "unknown error");
  }
}

void require_arg(const void* p, const char* name) {
  if (!p) throw cpl::ParameterError(std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void copy_out(const std::vector<double>& src, double* out, size_t len) {
  require_arg(out, "out");
  if (len != src.size())
    throw cpl::ParameterError("buffer length " + std::to_string(len) + " != " +
                              std::to_string(src.size()));
  std::memcpy(out, src.data(), src.size() * sizeof(double));
}

std::vector<double> flat(const cpl::Table& t) { return {t.flat().begin(), t.flat().end()}; }

}  // namespace

extern "C" {

const char* cpl_last_error(void) { return g_last_error.c_str(); }

const char* cpl_status_string(cpl_status status) {
  switch (status) {
    case CPL_OK: return "ok";
    case CPL_ERR_PARAMETER: return "parameter error";
    case CPL_ERR_SOLVER: return "solver error";
    case CPL_ERR_CONSISTENCY: return "consistency error";
    case CPL_ERR_CONTRACT: return "contract error";
    case CPL_ERR_SIZE: return "size error";
    case CPL_ERR_CONFIG: return "config error";
    case CPL_ERR_IO: return "io error";
    case CPL_ERR_TRAINING: return "training error";
    case CPL_ERR_STAGE: return "stage error";
    case CPL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void cpl_string_free(char* str) { std::free(str); }

cpl_status cpl_mdp_gridworld(size_t width, size_t height, size_t goal_x, size_t goal_y,
                             double step_reward, double goal_reward, double slip_prob, double gamma,
                             cpl_mdp** out) {
  return guard([&] {
    require_arg(out, "out");
    cpl::GridworldSpec spec;
    spec.width = width;
    spec.height = height;
    spec.goal = {goal_x, goal_y};
    spec.step_reward = step_reward;
    spec.goal_reward = goal_reward;
    spec.slip_prob = slip_prob;
    spec.gamma = gamma;
    *out = new cpl_mdp{cpl::build_gridworld(spec)};
  });
}

cpl_status cpl_mdp_bandit(const double* rewards, size_t num_actions, double gamma, cpl_mdp** out) {
  return guard([&] {
    require_arg(out, "out");
    require_arg(rewards, "rewards");
    *out = new cpl_mdp{cpl::build_single_state_bandit({rewards, num_actions}, gamma)};
  });
}

cpl_status cpl_mdp_random(size_t num_states, size_t num_actions, double gamma, uint64_t seed,
                          cpl_mdp** out) {
  return guard([&] {
    require_arg(out, "out");
    *out = new cpl_mdp{cpl::build_random_mdp(num_states, num_actions, gamma, seed)};
  });
}

cpl_status cpl_mdp_load(const char* path, cpl_mdp** out) {
  return guard([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new cpl_mdp{cpl::load_mdp(path)};
  });
}

cpl_status cpl_mdp_save(const cpl_mdp* mdp, const char* path) {
  return guard([&] {
    require_arg(mdp, "mdp");
    require_arg(path, "path");
    cpl::save_mdp(path, mdp->mdp);
  });
}

cpl_status cpl_mdp_validate(const cpl_mdp* mdp) {
  return guard([&] {
    require_arg(mdp, "mdp");
    cpl::require_valid(mdp->mdp);
  });
}

cpl_status cpl_mdp_sizes(const cpl_mdp* mdp, size_t* num_states, size_t* num_actions) {
  return guard([&] {
    require_arg(mdp, "mdp");
    if (num_states) *num_states = mdp->mdp.num_states;
    if (num_actions) *num_actions = mdp->mdp.num_actions;
  });
}

void cpl_mdp_free(cpl_mdp* mdp) { delete mdp; }

cpl_status cpl_solve(const cpl_mdp* mdp, double alpha, double tol, size_t max_iters,
                     cpl_solution** out) {
  return guard([&] {
    require_arg(mdp, "mdp");
    require_arg(out, "out");
    cpl::SolverOptions opts;
    opts.tol = tol;
    opts.max_iters = max_iters;
    *out = new cpl_solution{cpl::soft_value_iteration(mdp->mdp, alpha, opts)};
  });
}

cpl_status cpl_solution_policy(const cpl_solution* sol, double* out, size_t len) {
  return guard([&] {
    require_arg(sol, "solution");
    copy_out(flat(sol->solution.pi_star), out, len);
  });
}

cpl_status cpl_solution_advantage(const cpl_solution* sol, double* out, size_t len) {
  return guard([&] {
    require_arg(sol, "solution");
    copy_out(flat(sol->solution.a_star), out, len);
  });
}

cpl_status cpl_solution_values(const cpl_solution* sol, double* out, size_t len) {
  return guard([&] {
    require_arg(sol, "solution");
    copy_out(sol->solution.v_star, out, len);
  });
}

cpl_status cpl_solution_sizes(const cpl_solution* sol, size_t* num_states, size_t* num_actions) {
  return guard([&] {
    require_arg(sol, "solution");
    if (num_states) *num_states = sol->solution.q_star.rows();
    if (num_actions) *num_actions = sol->solution.q_star.cols();
  });
}

cpl_status cpl_solution_residual(const cpl_solution* sol, double* residual) {
  return guard([&] {
    require_arg(sol, "solution");
    require_arg(residual, "residual");
    *residual = sol->solution.residual;
  });
}

cpl_status cpl_solution_save(const cpl_solution* sol, const char* path) {
  return guard([&] {
    require_arg(sol, "solution");
    require_arg(path, "path");
    cpl::save_solution(path, sol->solution);
  });
}

cpl_status cpl_solution_load(const char* path, cpl_solution** out) {
  return guard([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new cpl_solution{cpl::load_solution(path)};
  });
}

void cpl_solution_free(cpl_solution* sol) { delete sol; }

cpl_status cpl_config_load(const char* path, cpl_config** out) {
  return guard([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new cpl_config{cpl::ConfigMap::load(path)};
  });
}

cpl_status cpl_config_parse(const char* text, cpl_config** out) {
  return guard([&] {
    require_arg(text, "text");
    require_arg(out, "out");
    *out = new cpl_config{cpl::ConfigMap::parse(text)};
  });
}

cpl_status cpl_config_set(cpl_config* config, const char* key, const char* value) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(key, "key");
    require_arg(value, "value");
    config->map.set(key, value);
  });
}

cpl_status cpl_config_render(const cpl_config* config, char** out) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(out, "out");
    *out = dup_string(config->map.resolved().render());
  });
}

cpl_status cpl_config_template(char** out) {
  return guard([&] {
    require_arg(out, "out");
    *out = dup_string(cpl::config_template());
  });
}

cpl_status cpl_config_build_mdp(const cpl_config* config, cpl_mdp** out) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(out, "out");
    *out = new cpl_mdp{cpl::build_environment(cpl::resolve_config(config->map))};
  });
}

void cpl_config_free(cpl_config* config) { delete config; }

cpl_status cpl_generate_dataset(const cpl_config* config, char** dataset_hash) {
  return guard([&] {
    require_arg(config, "config");
    const std::string hash = cpl::generate_dataset_files(config->map);
    if (dataset_hash) *dataset_hash = dup_string(hash);
  });
}

cpl_status cpl_train_policy(const cpl_config* config, const char* dataset_path, cpl_result** out) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(dataset_path, "dataset_path");
    require_arg(out, "out");
    *out = new cpl_result{cpl::train_from_dataset(config->map, dataset_path)};
  });
}

cpl_status cpl_run(const cpl_config* config, cpl_result** out) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(out, "out");
    *out = new cpl_result{cpl::run_experiment(config->map)};
  });
}

cpl_status cpl_evaluate_policy(const cpl_config* config, const char* policy_path,
                               char** metrics_json) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(policy_path, "policy_path");
    require_arg(metrics_json, "metrics_json");
    const auto metrics = cpl::evaluate_policy_file(config->map, policy_path);
    *metrics_json = dup_string(nlohmann::json(metrics).dump() + "\n");
  });
}

cpl_status cpl_sweep(const cpl_config* config, const char* axis, const char* const* values,
                     size_t num_values, size_t* num_runs) {
  return guard([&] {
    require_arg(config, "config");
    require_arg(axis, "axis");
    require_arg(values, "values");
    std::vector<std::string> v;
    for (size_t i = 0; i < num_values; ++i) {
      require_arg(values[i], "values[i]");
      v.emplace_back(values[i]);
    }
    const auto records = cpl::sweep(config->map, axis, v);
    if (num_runs) *num_runs = records.size();
  });
}

cpl_status cpl_result_metric(const cpl_result* result, const char* name, double* value) {
  return guard([&] {
    require_arg(result, "result");
    require_arg(name, "name");
    require_arg(value, "value");
    const auto it = result->record.metrics.find(name);
    if (it == result->record.metrics.end())
      throw cpl::ParameterError(std::string("no metric named ") + name);
    *value = it->second;
  });
}

cpl_status cpl_result_json(const cpl_result* result, char** out) {
  return guard([&] {
    require_arg(result, "result");
    require_arg(out, "out");
    *out = dup_string(result->record.to_json());
  });
}

void cpl_result_free(cpl_result* result) { delete result; }

}  // extern "C"
