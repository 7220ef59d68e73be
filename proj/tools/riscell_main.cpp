// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#include <riscell/riscell.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

// Output directory precedence: --out, then RISCELL_OUT_DIR, then the plan.
std::string resolve_out_dir(const std::string& cli_out,
                            const riscell::ExperimentPlan& plan) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("RISCELL_OUT_DIR"); env && *env) {
    return env;
  }
  return plan.output_dir;
}

int run_plan_to_files(const riscell::ExperimentPlan& plan,
                      const std::string& out_dir, int threads, bool verbose) {
  const riscell::ResultTable table =
      riscell::run_plan(plan, threads, verbose ? &std::cerr : nullptr);
  const riscell::OutputPaths paths = riscell::emit_outputs(table, out_dir);
  std::cout << "wrote " << paths.csv << '\n';
  std::cout << "wrote " << paths.plot << '\n';
  return 0;
}

void print_plan_summary(const riscell::ExperimentPlan& plan) {
  std::cout << "plan OK: J=" << plan.base.num_bs << " K=" << plan.base.num_users
            << " M=" << plan.base.bs_antennas << " N=" << plan.base.ris_elements
            << ", sweep " << plan.sweep_var << " over";
  for (int v : plan.sweep_values) std::cout << ' ' << v;
  std::cout << ", drops=" << plan.drops << ", methods";
  for (const auto& m : plan.methods) std::cout << ' ' << riscell::to_string(m);
  const std::size_t solves = plan.methods.size() * plan.sweep_values.size() *
                             static_cast<std::size_t>(plan.drops);
  std::cout << " (" << solves << " solves)\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-aided multi-BS downlink sum-rate experiments"};
  app.require_subcommand(1);

  std::string plan_path;
  std::string scenario_path;
  std::string out_dir;
  std::string var;
  std::string values_csv;
  std::string methods_csv;
  int drops = 1;
  int threads = 1;
  bool verbose = false;
  bool timing = false;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto* run = app.add_subcommand("run", "Run an experiment plan file");
  run->add_option("--plan", plan_path, "Plan file")->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides plan and env)");
  run->add_option("--threads", threads, "Worker threads")
      ->check(CLI::Range(1, 1024));
  run->add_flag("--timing", timing,
                "Measure wall_ms (off keeps output byte-reproducible)");
  run->add_flag("--verbose", verbose, "Per-drop progress on stderr");

  auto* validate = app.add_subcommand("validate",
                                      "Check a plan or scenario file");
  auto* vplan = validate->add_option("--plan", plan_path, "Plan file")
                    ->check(CLI::ExistingFile);
  auto* vscen = validate->add_option("--scenario", scenario_path,
                                     "Scenario file")
                    ->check(CLI::ExistingFile);
  vplan->excludes(vscen);

  auto* sweep = app.add_subcommand(
      "sweep", "Run a sweep assembled from command-line options");
  sweep->add_option("--scenario", scenario_path, "Base scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--var", var, "Sweep variable: M, N, or K")->required();
  sweep->add_option("--values", values_csv, "Comma-separated sweep values")
      ->required();
  sweep->add_option("--methods", methods_csv,
                    "Comma-separated methods (default: all six)");
  sweep->add_option("--drops", drops, "Monte Carlo drops")
      ->check(CLI::Range(1, 1000000));
  auto* seed_opt =
      sweep->add_option("--seed", seed, "Override the scenario seed");
  sweep->add_option("--out", out_dir, "Output directory (default: scenario's)");
  sweep->add_option("--threads", threads, "Worker threads")
      ->check(CLI::Range(1, 1024));
  sweep->add_flag("--timing", timing,
                  "Measure wall_ms (off keeps output byte-reproducible)");
  sweep->add_flag("--verbose", verbose, "Per-drop progress on stderr");

  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  try {
    if (run->parsed()) {
      riscell::ExperimentPlan plan = riscell::load_plan(plan_path);
      plan.timing = plan.timing || timing;
      return run_plan_to_files(plan, resolve_out_dir(out_dir, plan), threads,
                               verbose);
    }
    if (validate->parsed()) {
      if (!plan_path.empty()) {
        print_plan_summary(riscell::load_plan(plan_path));
      } else if (!scenario_path.empty()) {
        const riscell::SystemConfig cfg = riscell::load_scenario(scenario_path);
        std::cout << "scenario OK: J=" << cfg.num_bs << " K=" << cfg.num_users
                  << " M=" << cfg.bs_antennas << " N=" << cfg.ris_elements
                  << '\n';
      } else {
        std::cerr << "error: give --plan or --scenario\n";
        return 1;
      }
      return 0;
    }
    if (sweep->parsed()) {
      riscell::ExperimentPlan plan;
      plan.base = riscell::load_scenario(scenario_path);
      if (seed_given) plan.base.seed = seed;
      if (var.size() != 1 || (var != "M" && var != "N" && var != "K")) {
        throw std::invalid_argument("--var must be M, N, or K");
      }
      plan.sweep_var = var[0];
      for (const auto& part : riscell::kv::split(values_csv, ',')) {
        plan.sweep_values.push_back(
            static_cast<int>(riscell::kv::to_int(part, "--values")));
      }
      plan.drops = drops;
      if (methods_csv.empty()) {
        for (riscell::AssocMethod a : {riscell::AssocMethod::proposed,
                                       riscell::AssocMethod::gain_based}) {
          for (riscell::RisMode r : {riscell::RisMode::optimized,
                                     riscell::RisMode::random,
                                     riscell::RisMode::none}) {
            plan.methods.push_back({a, r});
          }
        }
      } else {
        for (const auto& part : riscell::kv::split(methods_csv, ',')) {
          plan.methods.push_back(riscell::parse_method(part));
        }
      }
      plan.timing = timing;
      const riscell::ValidationReport rep = riscell::validate_plan(plan);
      if (!rep.ok()) {
        throw std::invalid_argument("invalid sweep: " + rep.str());
      }
      return run_plan_to_files(plan, out_dir.empty() ? "." : out_dir, threads,
                               verbose);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
