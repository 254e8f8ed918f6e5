// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

// Command-line driver. Talks to the library only through include/cpl/cpl.h.

#include "cpl/cpl.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(cpl_status status) {
  if (status != CPL_OK)
    throw Failure(std::string(cpl_status_string(status)) + ": " + cpl_last_error());
}

struct ConfigDeleter {
  void operator()(cpl_config* c) const { cpl_config_free(c); }
};
struct ResultDeleter {
  void operator()(cpl_result* r) const { cpl_result_free(r); }
};
struct MdpDeleter {
  void operator()(cpl_mdp* m) const { cpl_mdp_free(m); }
};
struct SolutionDeleter {
  void operator()(cpl_solution* s) const { cpl_solution_free(s); }
};
using ConfigPtr = std::unique_ptr<cpl_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<cpl_result, ResultDeleter>;

std::string take(char* s) {
  std::string out = s ? s : "";
  cpl_string_free(s);
  return out;
}

/// "--section.key value" or "--section.key=value" pairs left over by CLI11.
std::vector<std::pair<std::string, std::string>> parse_overrides(std::vector<std::string> extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw Failure("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw Failure("missing value for --" + key);
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

struct Common {
  std::string config_path;
  std::string out_dir;
  std::string seed;
};

ConfigPtr load_config(const Common& common, const CLI::App& sub) {
  cpl_config* raw = nullptr;
  check(cpl_config_load(common.config_path.c_str(), &raw));
  ConfigPtr cfg(raw);
  for (const auto& [k, v] : parse_overrides(sub.remaining())) check(cpl_config_set(cfg.get(), k.c_str(), v.c_str()));
  if (!common.seed.empty()) check(cpl_config_set(cfg.get(), "run.seed", common.seed.c_str()));
  if (!common.out_dir.empty()) check(cpl_config_set(cfg.get(), "output.dir", common.out_dir.c_str()));
  return cfg;
}

void add_common(CLI::App* sub, Common& common, bool seed_required) {
  sub->add_option("-c,--config", common.config_path, "experiment config file")->required();
  sub->add_option("-o,--out-dir", common.out_dir, "output directory (overrides output.dir)");
  auto* seed = sub->add_option("--seed", common.seed, "root seed (overrides run.seed)");
  if (seed_required) seed->required();
  sub->allow_extras();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive preference learning on tabular MDPs"};
  app.require_subcommand(1);

  auto* tmpl = app.add_subcommand("template", "print the annotated config template");

  std::string mdp_path;
  std::string solve_config;
  std::string solution_out;
  double alpha = 0.1;
  double tol = 1e-10;
  std::size_t max_iters = 1000000;
  auto* solve = app.add_subcommand("solve", "soft value iteration on an MDP");
  auto* mdp_opt = solve->add_option("--mdp", mdp_path, "MDP JSON file");
  solve->add_option("-c,--config", solve_config, "experiment config (uses its env section)")
      ->excludes(mdp_opt);
  solve->add_option("--alpha", alpha, "temperature");
  solve->add_option("--tol", tol, "sup-norm tolerance");
  solve->add_option("--max-iters", max_iters, "iteration budget");
  solve->add_option("--out", solution_out, "solution JSON output")->required();

  Common gen_common;
  auto* gen = app.add_subcommand("gen-data", "generate a labeled preference dataset");
  add_common(gen, gen_common, true);

  Common train_common;
  std::string dataset_path;
  auto* trn = app.add_subcommand("train", "train on an existing dataset file");
  add_common(trn, train_common, false);
  trn->add_option("--dataset", dataset_path, "dataset.jsonl")->required();

  Common eval_common;
  std::string policy_path;
  auto* evl = app.add_subcommand("eval", "evaluate a policy file against the oracle");
  add_common(evl, eval_common, false);
  evl->add_option("--policy", policy_path, "policy.json")->required();

  Common run_common;
  auto* run = app.add_subcommand("run", "full pipeline: data, training, evaluation");
  add_common(run, run_common, true);

  Common sweep_common;
  std::string axis;
  std::string values;
  auto* swp = app.add_subcommand("sweep", "one run per value of a scalar config key");
  add_common(swp, sweep_common, true);
  swp->add_option("--axis", axis, "config key, e.g. method.lambda")->required();
  swp->add_option("--values", values, "comma-separated values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (tmpl->parsed()) {
      char* text = nullptr;
      check(cpl_config_template(&text));
      std::cout << take(text);
    } else if (solve->parsed()) {
      cpl_mdp* raw = nullptr;
      if (!mdp_path.empty()) {
        check(cpl_mdp_load(mdp_path.c_str(), &raw));
      } else if (!solve_config.empty()) {
        cpl_config* cfg = nullptr;
        check(cpl_config_load(solve_config.c_str(), &cfg));
        const ConfigPtr owned(cfg);
        check(cpl_config_build_mdp(cfg, &raw));
      } else {
        throw Failure("solve needs --mdp or --config");
      }
      const std::unique_ptr<cpl_mdp, MdpDeleter> mdp(raw);
      cpl_solution* sol = nullptr;
      check(cpl_solve(mdp.get(), alpha, tol, max_iters, &sol));
      const std::unique_ptr<cpl_solution, SolutionDeleter> owned(sol);
      check(cpl_solution_save(sol, solution_out.c_str()));
      double residual = 0.0;
      check(cpl_solution_residual(sol, &residual));
      std::printf("wrote %s (residual %.3g)\n", solution_out.c_str(), residual);
    } else if (gen->parsed()) {
      const ConfigPtr cfg = load_config(gen_common, *gen);
      char* hash = nullptr;
      check(cpl_generate_dataset(cfg.get(), &hash));
      std::cout << "dataset_hash " << take(hash) << "\n";
    } else if (trn->parsed()) {
      const ConfigPtr cfg = load_config(train_common, *trn);
      cpl_result* res = nullptr;
      check(cpl_train_policy(cfg.get(), dataset_path.c_str(), &res));
      const ResultPtr owned(res);
      char* json = nullptr;
      check(cpl_result_json(res, &json));
      std::cout << take(json);
    } else if (evl->parsed()) {
      const ConfigPtr cfg = load_config(eval_common, *evl);
      char* json = nullptr;
      check(cpl_evaluate_policy(cfg.get(), policy_path.c_str(), &json));
      std::cout << take(json);
    } else if (run->parsed()) {
      const ConfigPtr cfg = load_config(run_common, *run);
      cpl_result* res = nullptr;
      check(cpl_run(cfg.get(), &res));
      const ResultPtr owned(res);
      char* json = nullptr;
      check(cpl_result_json(res, &json));
      std::cout << take(json);
    } else if (swp->parsed()) {
      const ConfigPtr cfg = load_config(sweep_common, *swp);
      const auto list = split_list(values);
      std::vector<const char*> ptrs;
      for (const auto& v : list) ptrs.push_back(v.c_str());
      std::size_t runs = 0;
      check(cpl_sweep(cfg.get(), axis.c_str(), ptrs.data(), ptrs.size(), &runs));
      std::cout << runs << " runs\n";
    }
  } catch (const Failure& e) {
    std::cerr << "cpl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
