// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/ris_optimizer.hpp>

#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace riscell {

// Two-stage user association: stage 1 hands every BS its best direct-gain
// benchmark user, stage 2 greedily assigns the remaining users by
// hypothetical ZF SINR, redesigning the receiving cell after each
// assignment. A final exhaustive search picks the RIS-assisted BS.

// -------------------------------------------------------------- phase policy

// How a cell's reflection profile is produced during design passes: run the
// FP optimizer, or hold a fixed per-BS profile (neutral, random, ...).
struct PhasePolicy {
  std::optional<std::vector<cvec>> fixed;

  static PhasePolicy optimize() { return {}; }

  static PhasePolicy fixed_profiles(std::vector<cvec> profiles) {
    PhasePolicy p;
    p.fixed = std::move(profiles);
    return p;
  }

  static PhasePolicy neutral(int num_bs, int num_elements) {
    std::vector<cvec> profiles(num_bs, cvec::Ones(num_elements));
    return fixed_profiles(std::move(profiles));
  }
};

struct SolveOptions {
  SolverSettings fp;
  // The exhaustive RIS search recomputes every cell's ZF beams under the
  // candidate profile assignment; turning this off reuses the stage beams.
  bool exhaustive_recompute_zf = true;
};

struct SolveStats {
  std::vector<int> fp_outer_iters; // per BS, summed over design passes
  int stage2_rounds = 0;
  int cell_designs = 0;
};

// ------------------------------------------------------------ working state

// One cell's current design: its reflection profile and ZF beams for its
// served set (columns in served order).
struct CellDesign {
  PhaseProfile phi;
  cmat w_cols;
};

struct StageState {
  AssociationState assoc;
  std::vector<CellDesign> cells;
  SolveStats stats;
};

namespace detail {

inline cmat stack_effective_for_bs(const ChannelSet& ch, int j,
                                   const std::vector<int>& users,
                                   const cvec& phi) {
  cmat h(ch.bs_antennas, static_cast<Eigen::Index>(users.size()));
  for (std::size_t col = 0; col < users.size(); ++col) {
    h.col(static_cast<Eigen::Index>(col)) = effective_channel(
        ch.h_direct[j][users[col]], ch.h_ris_user[users[col]], phi,
        ch.g_bs_ris[j]);
  }
  return h;
}

// (Re)designs cell j for its current served set under the given policy.
inline void design_cell(StageState& st, int j, const ChannelSet& ch,
                        const SystemConfig& cfg, const SolveOptions& opt,
                        const PhasePolicy& policy) {
  auto& cell = st.cells[j];
  const auto& served = st.assoc.served[j];
  if (policy.fixed) {
    cell.phi.phases = (*policy.fixed)[j];
    if (served.empty()) {
      cell.w_cols = cmat(ch.bs_antennas, 0);
    } else {
      cell.w_cols =
          zf_columns(stack_effective_for_bs(ch, j, served, cell.phi.phases),
                     cfg.p_max, cfg.num_users);
    }
  } else {
    if (served.empty()) {
      cell.phi = PhaseProfile::neutral(ch.ris_elements);
      cell.w_cols = cmat(ch.bs_antennas, 0);
    } else {
      BsOptimizeResult r = optimize_bs(ch, j, served, cfg, opt.fp);
      cell.phi = std::move(r.phi);
      cell.w_cols = std::move(r.w_cols);
      st.stats.fp_outer_iters[j] += r.iterations;
    }
  }
  st.stats.cell_designs++;
}

inline void check_policy(const PhasePolicy& policy, const ChannelSet& ch) {
  if (!policy.fixed) return;
  if (policy.fixed->size() != static_cast<std::size_t>(ch.num_bs)) {
    throw std::invalid_argument("PhasePolicy: one fixed profile per BS required");
  }
  for (const auto& p : *policy.fixed) {
    if (p.size() != ch.ris_elements) {
      throw std::invalid_argument("PhasePolicy: profile length mismatch");
    }
  }
}

} // namespace detail

// ------------------------------------------------------------------ stage 1

// Every BS takes its strongest direct-gain user from the pool (benchmark
// users), then gets an initial design. Ties break toward the lower user
// index; BSs pick in index order.
inline StageState stage1_benchmark(const ChannelSet& ch,
                                   const SystemConfig& cfg,
                                   const SolveOptions& opt,
                                   const PhasePolicy& policy) {
  detail::check_policy(policy, ch);
  StageState st;
  st.assoc = AssociationState::fresh(ch.num_bs, ch.num_users);
  st.cells.resize(ch.num_bs);
  st.stats.fp_outer_iters.assign(ch.num_bs, 0);
  for (int j = 0; j < ch.num_bs; ++j) {
    int best_k = -1;
    double best_gain = -1.0;
    for (int k : st.assoc.pool) {
      const double g = ch.h_direct[j][k].squaredNorm();
      if (g > best_gain) {
        best_gain = g;
        best_k = k;
      }
    }
    if (best_k < 0) {
      throw std::invalid_argument("stage1_benchmark: fewer users than BSs");
    }
    st.assoc.assign(j, best_k);
  }
  for (int j = 0; j < ch.num_bs; ++j) {
    detail::design_cell(st, j, ch, cfg, opt, policy);
  }
  return st;
}

// ------------------------------------------------------------------ stage 2

struct CandidateScore {
  double sinr = 0.0;
  bool feasible = false;
};

// Hypothetical SINR of pooled user k if BS j admitted it: ZF beams are
// recomputed for A_j plus k under the cell's current profile, and k's SINR
// is read off those beams. Cells at antenna capacity, or whose enlarged
// channel matrix loses rank, are infeasible.
inline CandidateScore candidate_sinr(const StageState& st, int j, int k,
                                     const ChannelSet& ch,
                                     const SystemConfig& cfg) {
  std::vector<int> enlarged = st.assoc.served[j];
  enlarged.push_back(k);
  if (static_cast<int>(enlarged.size()) > ch.bs_antennas) {
    return {0.0, false};
  }
  const cvec& phi = st.cells[j].phi.phases;
  const cmat h_eff = detail::stack_effective_for_bs(ch, j, enlarged, phi);
  cmat w;
  try {
    w = zf_columns(h_eff, cfg.p_max, cfg.num_users);
  } catch (const RankDeficientError&) {
    return {0.0, false};
  }
  const Eigen::Index last = static_cast<Eigen::Index>(enlarged.size()) - 1;
  const cvec h_k = h_eff.col(last);
  double signal = 0.0;
  double interference = 0.0;
  for (Eigen::Index col = 0; col < w.cols(); ++col) {
    const double p = std::norm(h_k.dot(w.col(col)));
    if (col == last) {
      signal = p;
    } else {
      interference += p;
    }
  }
  return {signal / (interference + cfg.noise_power), true};
}

// Assigns every pooled user, one per round: the feasible (BS, user) pair
// with the highest hypothetical SINR wins (ties toward lower BS index, then
// lower user index), and the receiving cell is redesigned.
inline void stage2_associate_all(StageState& st, const ChannelSet& ch,
                                 const SystemConfig& cfg,
                                 const SolveOptions& opt,
                                 const PhasePolicy& policy) {
  detail::check_policy(policy, ch);
  while (!st.assoc.complete()) {
    int best_j = -1;
    int best_k = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < st.assoc.num_bs; ++j) {
      for (int k : st.assoc.pool) {
        const CandidateScore c = candidate_sinr(st, j, k, ch, cfg);
        if (c.feasible && c.sinr > best) {
          best = c.sinr;
          best_j = j;
          best_k = k;
        }
      }
    }
    if (best_j < 0) {
      throw std::runtime_error(
          "stage 2: no feasible (BS, user) candidate; every cell is at "
          "antenna capacity or rank-deficient");
    }
    st.assoc.assign(best_j, best_k);
    detail::design_cell(st, best_j, ch, cfg, opt, policy);
    st.stats.stage2_rounds++;
  }
}

// -------------------------------------------------------- exhaustive search

struct ExhaustiveResult {
  RISAssignment ris;
  std::vector<double> candidate_sum_rates; // indexed by assisted BS
  std::vector<PhaseProfile> profiles;      // winning per-BS profiles
  BeamformerSet beams;                     // winning beams
  rvec per_user_rate;
  double sum_rate = 0.0;
};

// Tries each BS as the assisted one: that BS keeps its designed profile,
// every other BS is evaluated against the neutral profile, and the full
// network sum rate decides. Ties break toward the lower BS index, and the
// returned sum rate is exactly the best table entry.
inline ExhaustiveResult ris_exhaustive_search(const StageState& st,
                                              const ChannelSet& ch,
                                              const SystemConfig& cfg,
                                              const SolveOptions& opt) {
  if (!st.assoc.complete()) {
    throw std::invalid_argument("ris_exhaustive_search: association incomplete");
  }
  ExhaustiveResult out;
  out.candidate_sum_rates.reserve(ch.num_bs);
  int best_j = -1;
  for (int assisted = 0; assisted < ch.num_bs; ++assisted) {
    std::vector<PhaseProfile> profiles(
        ch.num_bs, PhaseProfile::neutral(ch.ris_elements));
    profiles[assisted] = st.cells[assisted].phi;
    const EffectiveChannelSet eff = build_effective(ch, profiles);
    BeamformerSet beams;
    if (opt.exhaustive_recompute_zf) {
      beams = zf_beamformers(st.assoc, eff, cfg.p_max, cfg.num_users);
    } else {
      beams.users = st.assoc.served;
      beams.per_user_power = cfg.p_max / static_cast<double>(cfg.num_users);
      beams.w.resize(ch.num_bs);
      for (int j = 0; j < ch.num_bs; ++j) beams.w[j] = st.cells[j].w_cols;
    }
    const rvec rates = per_user_rates(st.assoc, eff, beams, cfg.noise_power);
    const double total = rates.sum();
    out.candidate_sum_rates.push_back(total);
    if (best_j < 0 || total > out.sum_rate) {
      best_j = assisted;
      out.sum_rate = total;
      out.profiles = std::move(profiles);
      out.beams = std::move(beams);
      out.per_user_rate = rates;
    }
  }
  out.ris = RISAssignment::one_hot(ch.num_bs, best_j);
  return out;
}

// ------------------------------------------------------------------- solve

struct NetworkSolution {
  AssociationState assoc;
  RISAssignment ris;
  std::vector<PhaseProfile> profiles; // assisted BS optimized, others neutral
  BeamformerSet beams;
  rvec per_user_rate;
  double sum_rate = 0.0;
  std::vector<double> ris_candidate_sum_rates;
  SolveStats stats;
};

namespace detail {

inline NetworkSolution assemble_solution(StageState&& st,
                                         ExhaustiveResult&& ex) {
  NetworkSolution sol;
  sol.assoc = std::move(st.assoc);
  sol.ris = std::move(ex.ris);
  sol.profiles = std::move(ex.profiles);
  sol.beams = std::move(ex.beams);
  sol.per_user_rate = std::move(ex.per_user_rate);
  sol.sum_rate = ex.sum_rate;
  sol.ris_candidate_sum_rates = std::move(ex.candidate_sum_rates);
  sol.stats = std::move(st.stats);
  return sol;
}

inline void check_solve_inputs(const SystemConfig& cfg, const ChannelSet& ch) {
  const ValidationReport rep = validate_for_solve(cfg);
  if (!rep.ok()) {
    throw std::invalid_argument("invalid config: " + rep.str());
  }
  if (!ch.dims_match(cfg)) {
    throw std::invalid_argument("channel set does not match config dimensions");
  }
}

} // namespace detail

// Full pipeline on one channel draw: stage 1, stage 2, exhaustive RIS
// assignment.
inline NetworkSolution solve(const SystemConfig& cfg, const ChannelSet& ch,
                             const SolveOptions& opt = {},
                             const PhasePolicy& policy = PhasePolicy::optimize()) {
  detail::check_solve_inputs(cfg, ch);
  StageState st = stage1_benchmark(ch, cfg, opt, policy);
  stage2_associate_all(st, ch, cfg, opt, policy);
  ExhaustiveResult ex = ris_exhaustive_search(st, ch, cfg, opt);
  return detail::assemble_solution(std::move(st), std::move(ex));
}

// Same beamforming treatment on a fixed, externally supplied association
// (baseline methods): design every populated cell, then the exhaustive RIS
// assignment.
inline NetworkSolution complete_from_association(
    const AssociationState& assoc, const ChannelSet& ch,
    const SystemConfig& cfg, const SolveOptions& opt = {},
    const PhasePolicy& policy = PhasePolicy::optimize()) {
  detail::check_solve_inputs(cfg, ch);
  detail::check_policy(policy, ch);
  if (!assoc.complete() || !assoc.consistent()) {
    throw std::invalid_argument(
        "complete_from_association: association must be complete and consistent");
  }
  StageState st;
  st.assoc = assoc;
  st.cells.resize(ch.num_bs);
  st.stats.fp_outer_iters.assign(ch.num_bs, 0);
  for (int j = 0; j < ch.num_bs; ++j) {
    detail::design_cell(st, j, ch, cfg, opt, policy);
  }
  ExhaustiveResult ex = ris_exhaustive_search(st, ch, cfg, opt);
  return detail::assemble_solution(std::move(st), std::move(ex));
}

// -------------------------------------------------------------------- audit

// Feasibility audit of a finished solution against its configuration:
// binary association with exactly one BS per user and no empty or
// over-capacity cell, one-hot RIS assignment, per-BS power budgets,
// equal-power unit beams, unit-modulus profiles, and rate bookkeeping.
inline ValidationReport audit_solution(const NetworkSolution& sol,
                                       const SystemConfig& cfg,
                                       double tol = 1e-9) {
  ValidationReport rep;
  auto fail = [&rep](const std::string& m) { rep.violations.push_back(m); };

  if (sol.assoc.num_bs != cfg.num_bs || sol.assoc.num_users != cfg.num_users) {
    fail("association dimensions do not match config");
    return rep;
  }
  if (!sol.assoc.consistent()) fail("association state is inconsistent");
  if (!sol.assoc.complete()) fail("association leaves users unassigned");
  for (int k = 0; k < cfg.num_users; ++k) {
    int count = 0;
    for (int j = 0; j < cfg.num_bs; ++j) count += sol.assoc.at(j, k);
    if (count != 1) fail("user " + std::to_string(k) + " served by " +
                         std::to_string(count) + " BSs");
  }
  for (int j = 0; j < cfg.num_bs; ++j) {
    const auto sz = static_cast<int>(sol.assoc.served[j].size());
    if (sz < 1) fail("BS " + std::to_string(j) + " serves no user");
    if (sz > cfg.bs_antennas) {
      fail("BS " + std::to_string(j) + " serves more users than antennas");
    }
  }

  if (static_cast<int>(sol.ris.r.size()) != cfg.num_bs || !sol.ris.valid()) {
    fail("RIS assignment is not one-hot over the BSs");
  }

  if (sol.profiles.size() != static_cast<std::size_t>(cfg.num_bs)) {
    fail("profile count does not match num_bs");
  } else {
    for (int j = 0; j < cfg.num_bs; ++j) {
      if (sol.profiles[j].size() != cfg.ris_elements) {
        fail("profile " + std::to_string(j) + " has wrong length");
      } else if (!sol.profiles[j].unit_modulus(tol)) {
        fail("profile " + std::to_string(j) + " violates unit modulus");
      }
    }
  }

  const double per_user = cfg.p_max / static_cast<double>(cfg.num_users);
  if (sol.beams.w.size() != static_cast<std::size_t>(cfg.num_bs)) {
    fail("beam set does not cover all BSs");
  } else {
    for (int j = 0; j < cfg.num_bs; ++j) {
      const cmat& w = sol.beams.w[j];
      double cell_power = 0.0;
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double p = w.col(c).squaredNorm();
        cell_power += p;
        if (std::abs(p - per_user) > tol * per_user) {
          fail("BS " + std::to_string(j) + " beam " + std::to_string(c) +
               " deviates from the equal power split");
        }
      }
      if (cell_power > cfg.p_max * (1.0 + tol)) {
        fail("BS " + std::to_string(j) + " exceeds its power budget");
      }
    }
  }

  if (sol.per_user_rate.size() != cfg.num_users) {
    fail("per-user rate vector has wrong length");
  } else {
    double total = 0.0;
    for (Eigen::Index k = 0; k < sol.per_user_rate.size(); ++k) {
      if (!(sol.per_user_rate[k] >= 0.0)) {
        fail("user " + std::to_string(k) + " has a negative rate");
      }
      total += sol.per_user_rate[k];
    }
    if (std::abs(total - sol.sum_rate) >
        tol * std::max(1.0, std::abs(sol.sum_rate))) {
      fail("sum_rate does not match the per-user rates");
    }
  }
  return rep;
}

// ---------------------------------------------------------------- reporting

inline void write_solution(std::ostream& out, const NetworkSolution& sol) {
  char buf[64];
  auto num = [&buf](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  out << "riscell solution v1\n";
  out << "num_bs " << sol.assoc.num_bs << '\n';
  out << "num_users " << sol.assoc.num_users << '\n';
  out << "sum_rate " << num(sol.sum_rate) << '\n';
  out << "assisted_bs " << sol.ris.assisted() << '\n';
  for (int j = 0; j < sol.assoc.num_bs; ++j) {
    out << "served " << j;
    for (int k : sol.assoc.served[j]) out << ' ' << k;
    out << '\n';
  }
  for (Eigen::Index k = 0; k < sol.per_user_rate.size(); ++k) {
    out << "rate " << k << ' ' << num(sol.per_user_rate[k]) << '\n';
  }
  for (std::size_t j = 0; j < sol.ris_candidate_sum_rates.size(); ++j) {
    out << "ris_candidate " << j << ' ' << num(sol.ris_candidate_sum_rates[j])
        << '\n';
  }
  for (std::size_t j = 0; j < sol.stats.fp_outer_iters.size(); ++j) {
    out << "fp_iters " << j << ' ' << sol.stats.fp_outer_iters[j] << '\n';
  }
  out << "stage2_rounds " << sol.stats.stage2_rounds << '\n';
  out << "end\n";
}

} // namespace riscell
