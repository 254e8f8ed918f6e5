/*
 * SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CPL_CPL_H
#define CPL_CPL_H

#include <stddef.h>
#include <stdint.h>

#if defined(CPL_BUILDING_LIBRARY)
#define CPL_API __attribute__((visibility("default")))
#else
#define CPL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cpl_status {
  CPL_OK = 0,
  CPL_ERR_PARAMETER = 1,
  CPL_ERR_SOLVER = 2,
  CPL_ERR_CONSISTENCY = 3,
  CPL_ERR_CONTRACT = 4,
  CPL_ERR_SIZE = 5,
  CPL_ERR_CONFIG = 6,
  CPL_ERR_IO = 7,
  CPL_ERR_TRAINING = 8,
  CPL_ERR_STAGE = 9,
  CPL_ERR_INTERNAL = 10
} cpl_status;

typedef struct cpl_mdp cpl_mdp;
typedef struct cpl_solution cpl_solution;
typedef struct cpl_config cpl_config;
typedef struct cpl_result cpl_result;

/* Message of the last failure on the calling thread; "" after success. */
CPL_API const char* cpl_last_error(void);
CPL_API const char* cpl_status_string(cpl_status status);
/* Strings returned through char** out-parameters are released here. */
CPL_API void cpl_string_free(char* str);

/* Environments. */
CPL_API cpl_status cpl_mdp_gridworld(size_t width, size_t height, size_t goal_x, size_t goal_y,
                                     double step_reward, double goal_reward, double slip_prob,
                                     double gamma, cpl_mdp** out);
CPL_API cpl_status cpl_mdp_bandit(const double* rewards, size_t num_actions, double gamma,
                                  cpl_mdp** out);
CPL_API cpl_status cpl_mdp_random(size_t num_states, size_t num_actions, double gamma,
                                  uint64_t seed, cpl_mdp** out);
CPL_API cpl_status cpl_mdp_load(const char* path, cpl_mdp** out);
CPL_API cpl_status cpl_mdp_save(const cpl_mdp* mdp, const char* path);
/* CPL_OK if valid; otherwise CPL_ERR_PARAMETER with the violations in cpl_last_error. */
CPL_API cpl_status cpl_mdp_validate(const cpl_mdp* mdp);
CPL_API cpl_status cpl_mdp_sizes(const cpl_mdp* mdp, size_t* num_states, size_t* num_actions);
CPL_API void cpl_mdp_free(cpl_mdp* mdp);

/* Soft value iteration. */
CPL_API cpl_status cpl_solve(const cpl_mdp* mdp, double alpha, double tol, size_t max_iters,
                             cpl_solution** out);
/* Row-major [S][A] copies; len must equal S * A (S for values). */
CPL_API cpl_status cpl_solution_policy(const cpl_solution* sol, double* out, size_t len);
CPL_API cpl_status cpl_solution_advantage(const cpl_solution* sol, double* out, size_t len);
CPL_API cpl_status cpl_solution_values(const cpl_solution* sol, double* out, size_t len);
CPL_API cpl_status cpl_solution_sizes(const cpl_solution* sol, size_t* num_states,
                                      size_t* num_actions);
CPL_API cpl_status cpl_solution_residual(const cpl_solution* sol, double* residual);
CPL_API cpl_status cpl_solution_save(const cpl_solution* sol, const char* path);
CPL_API cpl_status cpl_solution_load(const char* path, cpl_solution** out);
CPL_API void cpl_solution_free(cpl_solution* sol);

/* Experiment configuration ("section.key = value" text). */
CPL_API cpl_status cpl_config_load(const char* path, cpl_config** out);
CPL_API cpl_status cpl_config_parse(const char* text, cpl_config** out);
CPL_API cpl_status cpl_config_set(cpl_config* config, const char* key, const char* value);
/* Fully resolved canonical text. */
CPL_API cpl_status cpl_config_render(const cpl_config* config, char** out);
CPL_API cpl_status cpl_config_template(char** out);
CPL_API cpl_status cpl_config_build_mdp(const cpl_config* config, cpl_mdp** out);
CPL_API void cpl_config_free(cpl_config* config);

/* Pipeline. Artifacts are written under the config's output.dir. */
CPL_API cpl_status cpl_generate_dataset(const cpl_config* config, char** dataset_hash);
CPL_API cpl_status cpl_train_policy(const cpl_config* config, const char* dataset_path,
                                    cpl_result** out);
CPL_API cpl_status cpl_run(const cpl_config* config, cpl_result** out);
/* Metrics of a policy JSON file as a sorted-key JSON object. */
CPL_API cpl_status cpl_evaluate_policy(const cpl_config* config, const char* policy_path,
                                       char** metrics_json);
/* One run per value; writes <output.dir>/sweep.csv. */
CPL_API cpl_status cpl_sweep(const cpl_config* config, const char* axis,
                             const char* const* values, size_t num_values, size_t* num_runs);

CPL_API cpl_status cpl_result_metric(const cpl_result* result, const char* name, double* value);
CPL_API cpl_status cpl_result_json(const cpl_result* result, char** out);
CPL_API void cpl_result_free(cpl_result* result);

#ifdef __cplusplus
}
#endif

#endif /* CPL_CPL_H */
