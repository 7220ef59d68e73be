// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riscell {

using complexd = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using rvec = Eigen::VectorXd;

// ----------------------------------------------------------------- geometry

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// ------------------------------------------------------------- unit helpers

// All internal math runs in watts and linear gains; dB-scale values exist
// only at the configuration boundary.
inline double dbm_to_watts(double dbm) {
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

inline double watts_to_dbm(double watts) {
  if (!(watts > 0.0)) {
    throw std::domain_error("watts_to_dbm: power must be positive");
  }
  return 10.0 * std::log10(watts) + 30.0;
}

// ------------------------------------------------------------ Rician factor

// Rician K-factor of a fading link. A pure-LoS link (infinite kappa) is a
// distinct state rather than a sentinel double, so code switching on the
// regime cannot silently feed infinity into the mixing weights.
class RicianFactor {
 public:
  RicianFactor() = default;

  static RicianFactor pure_los() {
    RicianFactor f;
    f.los_only_ = true;
    return f;
  }

  static RicianFactor finite(double kappa) {
    if (!std::isfinite(kappa) || kappa < 0.0) {
      throw std::invalid_argument("RicianFactor: kappa must be finite and >= 0");
    }
    RicianFactor f;
    f.kappa_ = kappa;
    return f;
  }

  bool is_pure_los() const { return los_only_; }

  double kappa() const {
    if (los_only_) {
      throw std::logic_error("RicianFactor: kappa() called on a pure-LoS factor");
    }
    return kappa_;
  }

 private:
  bool los_only_ = false;
  double kappa_ = 0.0;
};

// ------------------------------------------------------------ configuration

// Full description of one network instance. Distances in metres, powers in
// watts, angles in radians.
struct SystemConfig {
  int num_bs = 0;       // J
  int num_users = 0;    // K
  int bs_antennas = 0;  // M, per BS
  int ris_elements = 0; // N

  std::vector<Point2> bs_positions;
  Point2 ris_position;
  Point2 user_center;   // users are dropped uniformly in a disk
  double user_radius = 0.0;

  double p_max = 0.0;       // per-BS transmit power budget
  double noise_power = 0.0; // receiver noise sigma^2, same for every user

  double pathloss_c0 = 1e-3; // gain at the reference distance
  double pathloss_d0 = 1.0;  // reference distance
  double alpha_direct = 3.9;
  double alpha_bs_ris = 2.5;
  double alpha_ris_user = 2.7;

  RicianFactor rician_bs_ris = RicianFactor::pure_los();
  RicianFactor rician_ris_user = RicianFactor::finite(1.0);

  std::uint64_t seed = 0;
};

// Four-BS reference deployment used by the bundled scenarios and tests:
// one RIS at the origin, users dropped in a 150 m disk centred at (25, -25).
inline SystemConfig reference_scenario() {
  SystemConfig cfg;
  cfg.num_bs = 4;
  cfg.num_users = 25;
  cfg.bs_antennas = 32;
  cfg.ris_elements = 64;
  cfg.bs_positions = {{0.0, 200.0}, {-150.0, 0.0}, {250.0, 0.0}, {0.0, -300.0}};
  cfg.ris_position = {0.0, 0.0};
  cfg.user_center = {25.0, -25.0};
  cfg.user_radius = 150.0;
  cfg.p_max = dbm_to_watts(50.0);         // 100 W
  cfg.noise_power = dbm_to_watts(-80.0);  // 1e-11 W
  cfg.seed = 1;
  return cfg;
}

// --------------------------------------------------------------- validation

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }

  std::string str() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
};

namespace detail {

inline void check_common(const SystemConfig& cfg, ValidationReport& rep) {
  auto fail = [&rep](const std::string& msg) { rep.violations.push_back(msg); };

  if (cfg.num_bs < 1) fail("num_bs must be >= 1");
  if (cfg.num_users < 1) fail("num_users must be >= 1");
  if (cfg.bs_antennas < 1) fail("bs_antennas must be >= 1");
  if (cfg.ris_elements < 1) fail("ris_elements must be >= 1");
  if (cfg.num_bs >= 1 &&
      cfg.bs_positions.size() != static_cast<std::size_t>(cfg.num_bs)) {
    fail("bs_positions must list exactly num_bs positions");
  }
  if (cfg.num_users >= 1 && cfg.num_bs >= 1 && cfg.num_users < cfg.num_bs) {
    fail("num_users < num_bs: every BS must serve at least one user");
  }
  if (!(cfg.user_radius > 0.0)) fail("user_radius must be positive");
  if (!(cfg.p_max > 0.0)) fail("p_max must be positive");
  if (!(cfg.noise_power > 0.0)) fail("noise_power must be positive");
  if (!(cfg.pathloss_c0 > 0.0)) fail("pathloss_c0 must be positive");
  if (!(cfg.pathloss_d0 > 0.0)) fail("pathloss_d0 must be positive");
  if (!(cfg.alpha_direct > 0.0)) fail("alpha_direct must be positive");
  if (!(cfg.alpha_bs_ris > 0.0)) fail("alpha_bs_ris must be positive");
  if (!(cfg.alpha_ris_user > 0.0)) fail("alpha_ris_user must be positive");
}

} // namespace detail

// Strict structural check for user-supplied configurations. Every violation
// is reported, not just the first.
inline ValidationReport validate_config(const SystemConfig& cfg) {
  ValidationReport rep;
  detail::check_common(cfg, rep);
  if (cfg.bs_antennas >= 1 && cfg.num_users >= 1 &&
      cfg.bs_antennas < cfg.num_users) {
    rep.violations.push_back(
        "bs_antennas < num_users: per-BS zero-forcing needs M >= K");
  }
  return rep;
}

// Relaxed variant for sweep-derived configurations: ZF capacity only has to
// hold in aggregate (K <= J*M); the association stage keeps each individual
// BS at or below its antenna count.
inline ValidationReport validate_for_solve(const SystemConfig& cfg) {
  ValidationReport rep;
  detail::check_common(cfg, rep);
  if (cfg.num_bs >= 1 && cfg.bs_antennas >= 1 &&
      static_cast<long long>(cfg.num_users) >
          static_cast<long long>(cfg.num_bs) * cfg.bs_antennas) {
    rep.violations.push_back(
        "num_users exceeds total ZF capacity (num_users > num_bs * bs_antennas)");
  }
  return rep;
}

inline void require_valid_config(const SystemConfig& cfg) {
  const ValidationReport rep = validate_config(cfg);
  if (!rep.ok()) {
    throw std::invalid_argument("invalid config: " + rep.str());
  }
}

// -------------------------------------------------------------- association

// Binary BS-user assignment matrix u plus the derived served sets A_j and
// the not-yet-assigned pool Q. `served[j]` keeps assignment order; `pool`
// stays ascending.
struct AssociationState {
  int num_bs = 0;
  int num_users = 0;
  std::vector<std::uint8_t> u;          // row-major J x K, values 0/1
  std::vector<std::vector<int>> served; // A_j per BS
  std::vector<int> pool;                // Q, ascending user indices

  static AssociationState fresh(int num_bs, int num_users) {
    if (num_bs < 1 || num_users < 1) {
      throw std::invalid_argument("AssociationState: dimensions must be >= 1");
    }
    AssociationState st;
    st.num_bs = num_bs;
    st.num_users = num_users;
    st.u.assign(static_cast<std::size_t>(num_bs) * num_users, 0);
    st.served.resize(num_bs);
    st.pool.resize(num_users);
    for (int k = 0; k < num_users; ++k) st.pool[k] = k;
    return st;
  }

  std::uint8_t at(int j, int k) const {
    return u[static_cast<std::size_t>(j) * num_users + k];
  }

  // Moves user k from the pool to BS j.
  void assign(int j, int k) {
    check_indices(j, k);
    auto it = std::lower_bound(pool.begin(), pool.end(), k);
    if (it == pool.end() || *it != k) {
      throw std::logic_error("AssociationState::assign: user already assigned");
    }
    pool.erase(it);
    u[static_cast<std::size_t>(j) * num_users + k] = 1;
    served[j].push_back(k);
  }

  // Returns user k to the pool (used by baseline repair moves).
  void unassign(int j, int k) {
    check_indices(j, k);
    auto& a = served[j];
    auto it = std::find(a.begin(), a.end(), k);
    if (it == a.end()) {
      throw std::logic_error("AssociationState::unassign: user not served by this BS");
    }
    a.erase(it);
    u[static_cast<std::size_t>(j) * num_users + k] = 0;
    pool.insert(std::lower_bound(pool.begin(), pool.end(), k), k);
  }

  // Serving BS of user k, or -1 while k is still pooled.
  int serving_bs(int k) const {
    for (int j = 0; j < num_bs; ++j) {
      if (at(j, k)) return j;
    }
    return -1;
  }

  bool complete() const { return pool.empty(); }

  // Cross-checks u against served/pool; used by tests and the audit.
  bool consistent() const {
    std::vector<int> owner(num_users, -1);
    for (int j = 0; j < num_bs; ++j) {
      for (int k : served[j]) {
        if (k < 0 || k >= num_users || owner[k] != -1) return false;
        owner[k] = j;
      }
    }
    for (int k : pool) {
      if (k < 0 || k >= num_users || owner[k] != -1) return false;
      owner[k] = num_bs; // pooled marker
    }
    for (int k = 0; k < num_users; ++k) {
      if (owner[k] == -1) return false;
    }
    for (int j = 0; j < num_bs; ++j) {
      for (int k = 0; k < num_users; ++k) {
        const bool bit = at(j, k) != 0;
        if (bit != (owner[k] == j)) return false;
      }
    }
    return std::is_sorted(pool.begin(), pool.end());
  }

 private:
  void check_indices(int j, int k) const {
    if (j < 0 || j >= num_bs || k < 0 || k >= num_users) {
      throw std::out_of_range("AssociationState: index out of range");
    }
  }
};

// ------------------------------------------------------------ phase profile

// One BS's view of the RIS reflection coefficients. Unit modulus per
// element; the all-ones neutral profile is both the optimizer start point
// and what a non-assisted BS is evaluated against.
struct PhaseProfile {
  cvec phases;

  static PhaseProfile neutral(int num_elements) {
    if (num_elements < 0) {
      throw std::invalid_argument("PhaseProfile: negative element count");
    }
    PhaseProfile p;
    p.phases = cvec::Ones(num_elements);
    return p;
  }

  int size() const { return static_cast<int>(phases.size()); }

  bool unit_modulus(double tol = 1e-9) const {
    for (Eigen::Index n = 0; n < phases.size(); ++n) {
      if (std::abs(std::abs(phases[n]) - 1.0) > tol) return false;
    }
    return true;
  }
};

// ----------------------------------------------------------- RIS assignment

// One-hot BS-RIS association vector: exactly one BS operates on the RIS's
// frequency band and is assisted by it.
struct RISAssignment {
  std::vector<std::uint8_t> r;

  static RISAssignment one_hot(int num_bs, int assisted_bs) {
    if (num_bs < 1 || assisted_bs < 0 || assisted_bs >= num_bs) {
      throw std::invalid_argument("RISAssignment: assisted BS out of range");
    }
    RISAssignment a;
    a.r.assign(num_bs, 0);
    a.r[assisted_bs] = 1;
    return a;
  }

  int assisted() const {
    int found = -1;
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j]) {
        if (found >= 0) throw std::logic_error("RISAssignment: multiple BSs set");
        found = static_cast<int>(j);
      }
    }
    if (found < 0) throw std::logic_error("RISAssignment: no BS set");
    return found;
  }

  bool valid() const {
    int count = 0;
    for (auto b : r) {
      if (b > 1) return false;
      count += b;
    }
    return count == 1;
  }
};

} // namespace riscell
