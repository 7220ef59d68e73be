// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/association.hpp>
#include <riscell/scenario.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace riscell {

// Monte Carlo harness: sweeps one dimension of a base scenario, runs every
// requested method on shared per-drop channel draws, and writes plot-ready
// CSV output.

// ------------------------------------------------------------------ methods

enum class AssocMethod { proposed, gain_based };
enum class RisMode { optimized, random, none };

struct Method {
  AssocMethod assoc = AssocMethod::proposed;
  RisMode ris = RisMode::optimized;
};

inline bool operator==(const Method& a, const Method& b) {
  return a.assoc == b.assoc && a.ris == b.ris;
}

// Canonical listing order: association first, RIS mode second.
inline int method_order(const Method& m) {
  return static_cast<int>(m.assoc) * 3 + static_cast<int>(m.ris);
}

inline std::string to_string(const Method& m) {
  const std::string a =
      m.assoc == AssocMethod::proposed ? "proposed" : "gain_based";
  const std::string r = m.ris == RisMode::optimized  ? "ris_optimized"
                        : m.ris == RisMode::random   ? "ris_random"
                                                     : "ris_none";
  return a + "/" + r;
}

inline Method parse_method(const std::string& s) {
  for (AssocMethod a : {AssocMethod::proposed, AssocMethod::gain_based}) {
    for (RisMode r : {RisMode::optimized, RisMode::random, RisMode::none}) {
      const Method m{a, r};
      if (to_string(m) == kv::trim(s)) return m;
    }
  }
  throw std::invalid_argument("unknown method '" + s + "'");
}

// ----------------------------------------------------------------- baseline

// Nearest-BS style baseline: every user picks its best direct-gain BS (ties
// toward the lower BS index). Two repairs keep the result feasible: an
// empty BS takes the globally weakest user among multiply-served cells, and
// an over-capacity cell sheds its weakest user to its best BS with spare
// antennas.
inline AssociationState gain_based_association(const ChannelSet& ch,
                                               const SystemConfig& cfg) {
  AssociationState assoc = AssociationState::fresh(ch.num_bs, ch.num_users);
  auto gain = [&ch](int j, int k) { return ch.h_direct[j][k].squaredNorm(); };

  for (int k = 0; k < ch.num_users; ++k) {
    int best_j = 0;
    double best = gain(0, k);
    for (int j = 1; j < ch.num_bs; ++j) {
      const double g = gain(j, k);
      if (g > best) {
        best = g;
        best_j = j;
      }
    }
    assoc.assign(best_j, k);
  }

  auto first_empty = [&assoc]() {
    for (int j = 0; j < assoc.num_bs; ++j) {
      if (assoc.served[j].empty()) return j;
    }
    return -1;
  };
  for (int empty = first_empty(); empty >= 0; empty = first_empty()) {
    int move_j = -1;
    int move_k = -1;
    double weakest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < assoc.num_bs; ++j) {
      if (assoc.served[j].size() < 2) continue;
      for (int k : assoc.served[j]) {
        const double g = gain(j, k);
        if (g < weakest) {
          weakest = g;
          move_j = j;
          move_k = k;
        }
      }
    }
    if (move_j < 0) {
      throw std::runtime_error(
          "gain_based_association: cannot repair an empty BS");
    }
    assoc.unassign(move_j, move_k);
    assoc.assign(empty, move_k);
  }

  auto first_overfull = [&assoc, &cfg]() {
    for (int j = 0; j < assoc.num_bs; ++j) {
      if (static_cast<int>(assoc.served[j].size()) > cfg.bs_antennas) return j;
    }
    return -1;
  };
  for (int over = first_overfull(); over >= 0; over = first_overfull()) {
    int move_k = -1;
    double weakest = std::numeric_limits<double>::infinity();
    for (int k : assoc.served[over]) {
      const double g = gain(over, k);
      if (g < weakest) {
        weakest = g;
        move_k = k;
      }
    }
    int target = -1;
    double best = -1.0;
    for (int j = 0; j < assoc.num_bs; ++j) {
      if (j == over ||
          static_cast<int>(assoc.served[j].size()) >= cfg.bs_antennas) {
        continue;
      }
      const double g = gain(j, move_k);
      if (g > best) {
        best = g;
        target = j;
      }
    }
    if (target < 0) {
      throw std::runtime_error(
          "gain_based_association: no BS has spare ZF capacity");
    }
    assoc.unassign(over, move_k);
    assoc.assign(target, move_k);
  }
  return assoc;
}

// --------------------------------------------------------------- run_method

// Per-BS random-but-fixed unit-modulus profiles for the ris_random mode;
// drawn from the config seed, so methods sharing a drop share them.
inline std::vector<cvec> random_phase_profiles(const SystemConfig& cfg) {
  const SeedSource src{cfg.seed};
  std::vector<cvec> profiles(cfg.num_bs);
  for (int j = 0; j < cfg.num_bs; ++j) {
    auto gen = src.stream(seed_tag::random_phase, static_cast<std::uint64_t>(j));
    std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
    cvec p(cfg.ris_elements);
    for (int n = 0; n < cfg.ris_elements; ++n) {
      p[n] = std::polar(1.0, unif(gen));
    }
    profiles[j] = std::move(p);
  }
  return profiles;
}

// Runs one method on one channel draw. ris_none zeroes the BS-RIS links so
// the surface contributes nothing; ris_random freezes random profiles and
// skips the FP optimizer; gain_based swaps the association stage but keeps
// the identical beamforming treatment.
inline NetworkSolution run_method(const Method& method, const ChannelSet& ch,
                                  const SystemConfig& cfg,
                                  const SolveOptions& opt = {}) {
  const ChannelSet* active = &ch;
  ChannelSet severed;
  if (method.ris == RisMode::none) {
    severed = ch;
    for (auto& g : severed.g_bs_ris) g.setZero();
    active = &severed;
  }

  PhasePolicy policy = PhasePolicy::optimize();
  if (method.ris == RisMode::random) {
    policy = PhasePolicy::fixed_profiles(random_phase_profiles(cfg));
  } else if (method.ris == RisMode::none) {
    policy = PhasePolicy::neutral(cfg.num_bs, cfg.ris_elements);
  }

  if (method.assoc == AssocMethod::proposed) {
    return solve(cfg, *active, opt, policy);
  }
  const AssociationState assoc = gain_based_association(*active, cfg);
  return complete_from_association(assoc, *active, cfg, opt, policy);
}

// -------------------------------------------------------------------- plans

struct ExperimentPlan {
  SystemConfig base;
  char sweep_var = 'M'; // 'M', 'N', or 'K'
  std::vector<int> sweep_values;
  int drops = 1;
  std::vector<Method> methods;
  std::string output_dir = ".";
  bool timing = false; // real wall_ms (breaks byte-reproducibility) vs zeros
};

inline SystemConfig apply_sweep(const SystemConfig& base, char var, int value) {
  SystemConfig cfg = base;
  switch (var) {
    case 'M':
      cfg.bs_antennas = value;
      break;
    case 'N':
      cfg.ris_elements = value;
      break;
    case 'K':
      cfg.num_users = value;
      break;
    default:
      throw std::invalid_argument("apply_sweep: sweep variable must be M, N, or K");
  }
  return cfg;
}

// Plan-level validation: structural fields plus solvability of every swept
// configuration (relaxed capacity rule, since sweeps may push M below K).
inline ValidationReport validate_plan(const ExperimentPlan& plan) {
  ValidationReport rep;
  auto fail = [&rep](const std::string& m) { rep.violations.push_back(m); };
  if (plan.sweep_var != 'M' && plan.sweep_var != 'N' && plan.sweep_var != 'K') {
    fail("sweep variable must be one of M, N, K");
    return rep;
  }
  if (plan.sweep_values.empty()) fail("sweep values list is empty");
  if (plan.drops < 1) fail("drops must be >= 1");
  if (plan.methods.empty()) fail("methods list is empty");
  for (std::size_t i = 0; i < plan.methods.size(); ++i) {
    for (std::size_t l = i + 1; l < plan.methods.size(); ++l) {
      if (plan.methods[i] == plan.methods[l]) {
        fail("duplicate method '" + to_string(plan.methods[i]) + "'");
      }
    }
  }
  for (int value : plan.sweep_values) {
    if (value < 1) {
      fail("sweep value " + std::to_string(value) + " is not positive");
      continue;
    }
    const ValidationReport sub =
        validate_for_solve(apply_sweep(plan.base, plan.sweep_var, value));
    if (!sub.ok()) {
      fail("sweep value " + std::to_string(value) + ": " + sub.str());
    }
  }
  return rep;
}

// Plan files are flat key-value text: `scenario` names a scenario file
// (resolved relative to the plan file), plus sweep/values/drops/methods and
// the optional output_dir and timing keys.
inline ExperimentPlan parse_plan(const std::string& text,
                                 const std::string& scenario_base_dir) {
  detail::KvReader r(text);
  ExperimentPlan plan;

  const std::string scenario_ref = r.take("scenario");
  std::filesystem::path scenario_path(scenario_ref);
  if (scenario_path.is_relative() && !scenario_base_dir.empty()) {
    scenario_path = std::filesystem::path(scenario_base_dir) / scenario_path;
  }
  plan.base = load_scenario(scenario_path.string());

  const std::string var = r.take("sweep");
  if (var.size() != 1 ||
      (var != "M" && var != "N" && var != "K")) {
    throw std::invalid_argument("key 'sweep': expected M, N, or K, got '" + var +
                                "'");
  }
  plan.sweep_var = var[0];

  for (const auto& part : kv::split(r.take("values"), ',')) {
    plan.sweep_values.push_back(
        static_cast<int>(kv::to_int(part, "values")));
  }
  plan.drops = static_cast<int>(kv::to_int(r.take("drops"), "drops"));
  for (const auto& part : kv::split(r.take("methods"), ',')) {
    plan.methods.push_back(parse_method(part));
  }
  plan.output_dir = r.take_or("output_dir", ".");
  plan.timing = kv::to_bool(r.take_or("timing", "off"), "timing");
  r.finish("plan");

  const ValidationReport rep = validate_plan(plan);
  if (!rep.ok()) {
    throw std::invalid_argument("invalid plan: " + rep.str());
  }
  return plan;
}

inline ExperimentPlan load_plan(const std::string& path) {
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_plan(detail::read_text_file(path), dir);
}

// ------------------------------------------------------------------ running

struct ResultRow {
  Method method;
  char sweep_var = 'M';
  int sweep_value = 0;
  int drop = 0;
  double sum_rate = 0.0;
  double avg_rate = 0.0;
  double wall_ms = 0.0;
};

using ResultTable = std::vector<ResultRow>;

// Runs the full plan. Drop d of any sweep value uses seed base+d, so every
// method and every sweep value of a drop shares the user placement stream,
// and rows are paired across methods. Worker threads split (value, drop)
// jobs; output order is deterministic regardless of thread count: methods
// in canonical order, then values in plan order, then drops.
inline ResultTable run_plan(const ExperimentPlan& plan, int threads = 1,
                            std::ostream* progress = nullptr) {
  const ValidationReport rep = validate_plan(plan);
  if (!rep.ok()) {
    throw std::invalid_argument("invalid plan: " + rep.str());
  }
  if (threads < 1) {
    throw std::invalid_argument("run_plan: thread count must be >= 1");
  }

  std::vector<Method> methods = plan.methods;
  std::sort(methods.begin(), methods.end(),
            [](const Method& a, const Method& b) {
              return method_order(a) < method_order(b);
            });

  const int num_values = static_cast<int>(plan.sweep_values.size());
  const int num_methods = static_cast<int>(methods.size());
  const int jobs = num_values * plan.drops;
  ResultTable rows(static_cast<std::size_t>(num_methods) * jobs);

  std::atomic<int> next_job{0};
  std::mutex progress_mutex;
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (true) {
      const int job = next_job.fetch_add(1);
      if (job >= jobs) return;
      try {
        const int vi = job / plan.drops;
        const int drop = job % plan.drops;
        SystemConfig cfg =
            apply_sweep(plan.base, plan.sweep_var, plan.sweep_values[vi]);
        cfg.seed = plan.base.seed + static_cast<std::uint64_t>(drop);
        const ChannelSet ch = gen_channel_set(cfg);
        for (int mi = 0; mi < num_methods; ++mi) {
          const auto t0 = std::chrono::steady_clock::now();
          const NetworkSolution sol = run_method(methods[mi], ch, cfg);
          double wall_ms = 0.0;
          if (plan.timing) {
            wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
          }
          ResultRow& row =
              rows[(static_cast<std::size_t>(mi) * num_values + vi) *
                       plan.drops +
                   drop];
          row.method = methods[mi];
          row.sweep_var = plan.sweep_var;
          row.sweep_value = plan.sweep_values[vi];
          row.drop = drop;
          row.sum_rate = sol.sum_rate;
          row.avg_rate = sol.sum_rate / static_cast<double>(cfg.num_users);
          row.wall_ms = wall_ms;
        }
        if (progress) {
          std::lock_guard<std::mutex> lock(progress_mutex);
          (*progress) << plan.sweep_var << "=" << plan.sweep_values[vi]
                      << " drop=" << drop << " done\n";
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int pool = std::min(threads, jobs);
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> team;
    team.reserve(pool);
    for (int t = 0; t < pool; ++t) team.emplace_back(worker);
    for (auto& t : team) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return rows;
}

// ---------------------------------------------------------------- reporting

inline void write_results_csv(std::ostream& out, const ResultTable& table) {
  out << "method,sweep_var,sweep_value,drop,sum_rate,avg_rate,wall_ms\n";
  char buf[128];
  for (const auto& row : table) {
    std::snprintf(buf, sizeof(buf), ",%c,%d,%d,%.6e,%.6e,%.6e", row.sweep_var,
                  row.sweep_value, row.drop, row.sum_rate, row.avg_rate,
                  row.wall_ms);
    out << to_string(row.method) << buf << '\n';
  }
}

namespace detail {

inline const char* plot_script_text() {
  return R"PY(#!/usr/bin/env python3
"""Plot mean curves with standard-error bars from results.csv (same directory)."""

import csv
import math
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(HERE, "results.csv"), newline="") as fh:
    rows = list(csv.DictReader(fh))
if not rows:
    raise SystemExit("results.csv is empty")

sweep_var = rows[0]["sweep_var"]
metric = "avg_rate" if sweep_var == "K" else "sum_rate"

series = defaultdict(lambda: defaultdict(list))
for row in rows:
    series[row["method"]][int(row["sweep_value"])].append(float(row[metric]))

fig, ax = plt.subplots(figsize=(6.4, 4.4))
for method in sorted(series):
    xs = sorted(series[method])
    means = [sum(series[method][x]) / len(series[method][x]) for x in xs]
    errs = []
    for x in xs:
        vals = series[method][x]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / max(len(vals) - 1, 1)
        errs.append(math.sqrt(var / len(vals)))
    ax.errorbar(xs, means, yerr=errs, marker="o", capsize=3, label=method)

xlabels = {"M": "BS antennas M", "N": "RIS elements N", "K": "users K"}
ax.set_xlabel(xlabels.get(sweep_var, sweep_var))
ax.set_ylabel(
    "Average rate (bit/s/Hz)" if metric == "avg_rate" else "Sum rate (bit/s/Hz)"
)
ax.grid(True, alpha=0.4)
ax.legend()
fig.tight_layout()
out = os.path.join(HERE, "results.png")
fig.savefig(out, dpi=150)
print("wrote", out)
)PY";
}

} // namespace detail

struct OutputPaths {
  std::string csv;
  std::string plot;
};

// Writes results.csv and a self-contained plot script next to it. The CSV
// bytes are a pure function of the result table (LF line endings, fixed
// float format); with plan timing off, rerunning a plan reproduces the file
// exactly.
inline OutputPaths emit_outputs(const ResultTable& table,
                                const std::string& output_dir) {
  if (table.empty()) {
    throw std::invalid_argument("emit_outputs: empty result table");
  }
  const std::filesystem::path dir(output_dir.empty() ? "." : output_dir);
  std::filesystem::create_directories(dir);

  OutputPaths paths;
  paths.csv = (dir / "results.csv").string();
  {
    std::ofstream out(paths.csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + paths.csv);
    write_results_csv(out, table);
  }
  paths.plot = (dir / "plot_results.py").string();
  {
    std::ofstream out(paths.plot, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + paths.plot);
    out << detail::plot_script_text();
  }
  return paths;
}

} // namespace riscell
