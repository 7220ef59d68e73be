// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/metrics.hpp>

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace riscell {

// Passive-beamforming optimizer for a single assisted cell. The sum-rate
// objective in phi is handled by a Lagrangian dual transform (auxiliary
// lambda), a quadratic transform (auxiliary q), and coordinate ascent over
// the unit-modulus phases, alternating with ZF beam refreshes.

struct SolverSettings {
  double outer_tol = 1e-4;        // relative objective change that stops outer loop
  int max_outer_iters = 100;
  int phase_sweeps_per_outer = 1; // full coordinate sweeps per (lambda, q) update
  double phase_tol = 1e-8;        // max element change that ends extra sweeps
  bool collect_step_trace = false;
};

// ------------------------------------------------------------ (a, b) tables

// Per (beam i, user l): a_{i,l} = diag(h_r,l^H) G w_i and b_{i,l} = h_d,l^H w_i,
// so the received amplitude factorizes as t_{i,l} = b_{i,l} + phi^H a_{i,l}.
// Everything downstream of the beams depends on the channels only through
// these tables.
struct AbTables {
  int size = 0;                     // served user count S
  std::vector<std::vector<cvec>> a; // [i][l], each N x 1
  cmat b;                           // (i, l)
};

inline AbTables compute_ab(const cmat& h_d_cols, const cmat& h_r_cols,
                           const cmat& g_bs_ris, const cmat& w_cols) {
  const Eigen::Index m = h_d_cols.rows();
  const Eigen::Index n = h_r_cols.rows();
  const Eigen::Index s = h_d_cols.cols();
  if (h_r_cols.cols() != s || w_cols.cols() != s || w_cols.rows() != m ||
      g_bs_ris.rows() != n || g_bs_ris.cols() != m) {
    throw std::invalid_argument("compute_ab: dimension mismatch");
  }
  AbTables ab;
  ab.size = static_cast<int>(s);
  ab.a.assign(s, std::vector<cvec>(s));
  ab.b = (h_d_cols.adjoint() * w_cols).transpose(); // (i, l) = h_d,l^H w_i
  for (Eigen::Index i = 0; i < s; ++i) {
    const cvec gw = g_bs_ris * w_cols.col(i);
    for (Eigen::Index l = 0; l < s; ++l) {
      ab.a[i][l] = (h_r_cols.col(l).conjugate().array() * gw.array()).matrix();
    }
  }
  return ab;
}

// t_{i,l} = b_{i,l} + phi^H a_{i,l} for all pairs.
inline cmat mix_table(const AbTables& ab, const cvec& phi) {
  cmat t(ab.size, ab.size);
  for (int i = 0; i < ab.size; ++i) {
    for (int l = 0; l < ab.size; ++l) {
      t(i, l) = ab.b(i, l) + phi.dot(ab.a[i][l]);
    }
  }
  return t;
}

// --------------------------------------------------------------- objectives

inline rvec sinrs_from_ab(const AbTables& ab, const cvec& phi,
                          double noise_power) {
  const cmat t = mix_table(ab, phi);
  rvec gam(ab.size);
  for (int l = 0; l < ab.size; ++l) {
    double interference = 0.0;
    for (int i = 0; i < ab.size; ++i) {
      if (i != l) interference += std::norm(t(i, l));
    }
    gam[l] = std::norm(t(l, l)) / (interference + noise_power);
  }
  return gam;
}

// f3: the cell's sum rate as a function of phi for fixed beams.
inline double objective_f3(const AbTables& ab, const cvec& phi,
                           double noise_power) {
  const rvec gam = sinrs_from_ab(ab, phi, noise_power);
  double total = 0.0;
  for (int l = 0; l < ab.size; ++l) total += std::log2(1.0 + gam[l]);
  return total;
}

// The dual transform is tight exactly at lambda = gamma.
inline rvec update_lambda(const rvec& sinrs) { return sinrs; }

namespace detail {

inline constexpr double inv_ln2 = 1.4426950408889634073599246810019; // 1/ln 2

inline double lambda_terms(const rvec& lambda) {
  double total = 0.0;
  for (Eigen::Index l = 0; l < lambda.size(); ++l) {
    if (!(lambda[l] >= 0.0)) {
      throw std::domain_error("lambda multipliers must be nonnegative");
    }
    total += std::log2(1.0 + lambda[l]) - inv_ln2 * lambda[l];
  }
  return total;
}

// Per-user ratio sum the quadratic transform is applied to:
// sum_l (1 + lambda_l) |t_{l,l}|^2 / (sum_i |t_{i,l}|^2 + sigma^2).
inline double ratio_sum(const AbTables& ab, const cvec& phi, const rvec& lambda,
                        double noise_power) {
  const cmat t = mix_table(ab, phi);
  double total = 0.0;
  for (int l = 0; l < ab.size; ++l) {
    double denom = noise_power;
    for (int i = 0; i < ab.size; ++i) denom += std::norm(t(i, l));
    total += (1.0 + lambda[l]) * std::norm(t(l, l)) / denom;
  }
  return total;
}

} // namespace detail

// f3': dual-transform surrogate. Equals f3 when lambda is set to the SINRs.
inline double f3_prime(const AbTables& ab, const cvec& phi, const rvec& lambda,
                       double noise_power) {
  if (lambda.size() != ab.size) {
    throw std::invalid_argument("f3_prime: lambda size mismatch");
  }
  return detail::lambda_terms(lambda) +
         detail::inv_ln2 * detail::ratio_sum(ab, phi, lambda, noise_power);
}

// f4: the ratio term of f3' in isolation (natural units, no 1/ln2).
inline double f4(const AbTables& ab, const cvec& phi, const rvec& lambda,
                 double noise_power) {
  if (lambda.size() != ab.size) {
    throw std::invalid_argument("f4: lambda size mismatch");
  }
  return detail::ratio_sum(ab, phi, lambda, noise_power);
}

// Optimal quadratic-transform auxiliaries for fixed (phi, lambda):
// q_l = sqrt(1 + lambda_l) t_{l,l} / (sum_i |t_{i,l}|^2 + sigma^2).
inline cvec update_q(const AbTables& ab, const cvec& phi, const rvec& lambda,
                     double noise_power) {
  if (lambda.size() != ab.size) {
    throw std::invalid_argument("update_q: lambda size mismatch");
  }
  const cmat t = mix_table(ab, phi);
  cvec q(ab.size);
  for (int l = 0; l < ab.size; ++l) {
    double denom = noise_power;
    for (int i = 0; i < ab.size; ++i) denom += std::norm(t(i, l));
    q[l] = std::sqrt(1.0 + lambda[l]) * t(l, l) / denom;
  }
  return q;
}

// f4': quadratic-transform surrogate of f4. Concave in each t, tight at
// q = update_q, i.e. f4'(phi, q_opt) = f4(phi).
inline double f4_prime(const AbTables& ab, const cvec& phi, const rvec& lambda,
                       const cvec& q, double noise_power) {
  if (lambda.size() != ab.size || q.size() != ab.size) {
    throw std::invalid_argument("f4_prime: auxiliary size mismatch");
  }
  const cmat t = mix_table(ab, phi);
  double total = 0.0;
  for (int l = 0; l < ab.size; ++l) {
    double denom = noise_power;
    for (int i = 0; i < ab.size; ++i) denom += std::norm(t(i, l));
    total += 2.0 * std::sqrt(1.0 + lambda[l]) *
                 (std::conj(q[l]) * t(l, l)).real() -
             std::norm(q[l]) * denom;
  }
  return total;
}

// ----------------------------------------------------------- quadratic form

// For fixed (lambda, q), f4' is a quadratic in phi:
// f4'(phi) = -phi^H D phi + 2 Re{phi^H v} + offset, with D Hermitian PSD.
// f5 names the phi-dependent part.
struct QuadraticForm {
  cmat d;
  cvec v;
  double offset = 0.0;
};

inline QuadraticForm build_quadratic(const AbTables& ab, const rvec& lambda,
                                     const cvec& q, double noise_power) {
  if (lambda.size() != ab.size || q.size() != ab.size) {
    throw std::invalid_argument("build_quadratic: auxiliary size mismatch");
  }
  const Eigen::Index n = ab.size > 0 ? ab.a[0][0].size() : 0;
  QuadraticForm qf;
  qf.d = cmat::Zero(n, n);
  qf.v = cvec::Zero(n);
  qf.offset = 0.0;
  for (int l = 0; l < ab.size; ++l) {
    const double q2 = std::norm(q[l]);
    const double root = std::sqrt(1.0 + lambda[l]);
    qf.v += root * std::conj(q[l]) * ab.a[l][l];
    qf.offset += 2.0 * root * (std::conj(q[l]) * ab.b(l, l)).real();
    double b2 = noise_power;
    for (int i = 0; i < ab.size; ++i) {
      qf.d.noalias() += q2 * (ab.a[i][l] * ab.a[i][l].adjoint());
      qf.v -= q2 * std::conj(ab.b(i, l)) * ab.a[i][l];
      b2 += std::norm(ab.b(i, l));
    }
    qf.offset -= q2 * b2;
  }
  return qf;
}

inline double f5(const QuadraticForm& qf, const cvec& phi) {
  const complexd quad = phi.dot(qf.d * phi); // phi^H D phi, real up to rounding
  return -quad.real() + 2.0 * phi.dot(qf.v).real();
}

// Value the optimizer reports along a trace: the full surrogate
// lambda terms + (1/ln2) * f4'(phi), evaluated through the quadratic form.
inline double surrogate_value(const QuadraticForm& qf, const rvec& lambda,
                              const cvec& phi) {
  return detail::lambda_terms(lambda) +
         detail::inv_ln2 * (f5(qf, phi) + qf.offset);
}

// Coordinate-wise maximizer of f5 in element n with the others held fixed:
// phi_n = exp(j arg(v_n - sum_{m != n} D_{n,m} phi_m)). A zero argument
// leaves the element unchanged (any phase is then optimal).
inline complexd phase_element_update(const QuadraticForm& qf, const cvec& phi,
                                     int n) {
  if (n < 0 || n >= phi.size()) {
    throw std::out_of_range("phase_element_update: element index out of range");
  }
  const complexd row_dot = (qf.d.row(n) * phi).value();
  const complexd c = qf.v[n] - (row_dot - qf.d(n, n) * phi[n]);
  if (std::abs(c) == 0.0) return phi[n];
  return std::polar(1.0, std::arg(c));
}

// One full ascending sweep over all elements, in place. Returns the largest
// single-element change.
inline double sweep_phases(const QuadraticForm& qf, cvec& phi) {
  double max_delta = 0.0;
  for (Eigen::Index n = 0; n < phi.size(); ++n) {
    const complexd next = phase_element_update(qf, phi, static_cast<int>(n));
    max_delta = std::max(max_delta, std::abs(next - phi[n]));
    phi[n] = next;
  }
  return max_delta;
}

// ----------------------------------------------------------------- FP solve

// Surrogate trajectory between two consecutive ZF refreshes. In exact
// arithmetic surrogate[0] equals f3_before (both transforms are tight) and
// the sequence surrogate[0..] then f3_after is nondecreasing.
struct FpSegment {
  double f3_before = 0.0;
  std::vector<double> surrogate;
  double f3_after = 0.0;
};

struct BsOptimizeResult {
  PhaseProfile phi;
  cmat w_cols;                       // final ZF beams, columns follow `served`
  std::vector<double> history;       // f3 per outer iteration, [0] = start
  std::vector<double> max_delta_phi; // per outer iteration
  int iterations = 0;
  std::vector<FpSegment> segments;   // only when collect_step_trace
};

// Alternating optimization of one cell: ZF beams for the current phi, then
// (lambda, q) updates and coordinate sweeps on phi, until the cell sum rate
// settles. `served` lists the users (network indices) of cell j; `phi_start`
// defaults to the neutral profile.
inline BsOptimizeResult optimize_bs(const ChannelSet& ch, int j,
                                    const std::vector<int>& served,
                                    const SystemConfig& cfg,
                                    const SolverSettings& settings = {},
                                    const cvec* phi_start = nullptr) {
  if (j < 0 || j >= ch.num_bs) {
    throw std::out_of_range("optimize_bs: BS index out of range");
  }
  if (served.empty()) {
    throw std::invalid_argument("optimize_bs: served set is empty");
  }
  if (static_cast<int>(served.size()) > ch.bs_antennas) {
    throw std::invalid_argument("optimize_bs: served set exceeds antenna count");
  }
  if (settings.max_outer_iters < 1 || settings.phase_sweeps_per_outer < 1) {
    throw std::invalid_argument("optimize_bs: iteration limits must be >= 1");
  }

  const int s = static_cast<int>(served.size());
  const int m = ch.bs_antennas;
  const int n = ch.ris_elements;
  cmat h_d_cols(m, s);
  cmat h_r_cols(n, s);
  for (int l = 0; l < s; ++l) {
    const int k = served[l];
    if (k < 0 || k >= ch.num_users) {
      throw std::out_of_range("optimize_bs: user index out of range");
    }
    h_d_cols.col(l) = ch.h_direct[j][k];
    h_r_cols.col(l) = ch.h_ris_user[k];
  }
  const cmat& g = ch.g_bs_ris[j];

  cvec phi = phi_start ? *phi_start : cvec::Ones(n);
  if (phi.size() != n) {
    throw std::invalid_argument("optimize_bs: phi_start length mismatch");
  }

  auto zf_for_phi = [&](const cvec& p) {
    cmat h_eff(m, s);
    for (int l = 0; l < s; ++l) {
      h_eff.col(l) =
          h_d_cols.col(l) +
          g.adjoint() * (h_r_cols.col(l).array() * p.array()).matrix();
    }
    return zf_columns(h_eff, cfg.p_max, cfg.num_users);
  };

  cmat w = zf_for_phi(phi);
  AbTables ab = compute_ab(h_d_cols, h_r_cols, g, w);

  BsOptimizeResult res;
  res.history.push_back(objective_f3(ab, phi, cfg.noise_power));

  for (int iter = 1; iter <= settings.max_outer_iters; ++iter) {
    const rvec lambda = update_lambda(sinrs_from_ab(ab, phi, cfg.noise_power));
    const cvec q = update_q(ab, phi, lambda, cfg.noise_power);
    const QuadraticForm qf = build_quadratic(ab, lambda, q, cfg.noise_power);

    FpSegment seg;
    if (settings.collect_step_trace) {
      seg.f3_before = res.history.back();
      seg.surrogate.push_back(surrogate_value(qf, lambda, phi));
    }

    double max_delta = 0.0;
    for (int sweep = 0; sweep < settings.phase_sweeps_per_outer; ++sweep) {
      double sweep_delta = 0.0;
      if (settings.collect_step_trace) {
        for (int el = 0; el < n; ++el) {
          const complexd next = phase_element_update(qf, phi, el);
          sweep_delta = std::max(sweep_delta, std::abs(next - phi[el]));
          phi[el] = next;
          seg.surrogate.push_back(surrogate_value(qf, lambda, phi));
        }
      } else {
        sweep_delta = sweep_phases(qf, phi);
      }
      max_delta = std::max(max_delta, sweep_delta);
      if (sweep_delta < settings.phase_tol) break;
    }

    if (settings.collect_step_trace) {
      seg.f3_after = objective_f3(ab, phi, cfg.noise_power);
      res.segments.push_back(std::move(seg));
    }

    w = zf_for_phi(phi);
    ab = compute_ab(h_d_cols, h_r_cols, g, w);

    const double prev = res.history.back();
    const double cur = objective_f3(ab, phi, cfg.noise_power);
    res.history.push_back(cur);
    res.max_delta_phi.push_back(max_delta);
    res.iterations = iter;
    if (std::abs(cur - prev) <=
        settings.outer_tol * std::max(std::abs(prev), 1e-12)) {
      break;
    }
  }

  res.phi.phases = std::move(phi);
  res.w_cols = std::move(w);
  return res;
}

// Per-iteration convergence trace as CSV rows.
inline void write_fp_trace(std::ostream& out, const BsOptimizeResult& res) {
  out << "iter,f3,max_delta_phi\n";
  char buf[64];
  for (int i = 1; i < static_cast<int>(res.history.size()); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g", i, res.history[i],
                  res.max_delta_phi[i - 1]);
    out << buf << '\n';
  }
}

} // namespace riscell
