// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/channel.hpp>
#include <riscell/precoder.hpp>
#include <riscell/system_model.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace riscell {

// ----------------------------------------------------------------- channels

// Effective downlink channel of one (BS, user) pair under reflection vector
// phi: h~^H = h_d^H + phi^H diag(h_r^H) G, returned as the column vector
// h~ = h_d + G^H diag(h_r) phi.
inline cvec effective_channel(const cvec& h_d, const cvec& h_r, const cvec& phi,
                              const cmat& g_bs_ris) {
  const Eigen::Index m = h_d.size();
  const Eigen::Index n = h_r.size();
  if (phi.size() != n || g_bs_ris.rows() != n || g_bs_ris.cols() != m) {
    throw std::invalid_argument("effective_channel: dimension mismatch");
  }
  return h_d + g_bs_ris.adjoint() * (h_r.array() * phi.array()).matrix();
}

// All J*K effective channels for a fixed set of per-BS phase profiles.
struct EffectiveChannelSet {
  std::vector<std::vector<cvec>> h; // [J][K], each M x 1
};

inline EffectiveChannelSet build_effective(
    const ChannelSet& ch, const std::vector<PhaseProfile>& profiles) {
  if (profiles.size() != static_cast<std::size_t>(ch.num_bs)) {
    throw std::invalid_argument("build_effective: one profile per BS required");
  }
  EffectiveChannelSet eff;
  eff.h.assign(ch.num_bs, std::vector<cvec>(ch.num_users));
  for (int j = 0; j < ch.num_bs; ++j) {
    if (profiles[j].size() != ch.ris_elements) {
      throw std::invalid_argument("build_effective: profile length mismatch");
    }
    for (int k = 0; k < ch.num_users; ++k) {
      eff.h[j][k] = effective_channel(ch.h_direct[j][k], ch.h_ris_user[k],
                                      profiles[j].phases, ch.g_bs_ris[j]);
    }
  }
  return eff;
}

// ----------------------------------------------------------------- stacking

// Effective channels of the given users at BS j, stacked as matrix columns
// in the given order.
inline cmat stack_effective(const EffectiveChannelSet& eff, int j,
                            const std::vector<int>& users) {
  if (users.empty()) {
    throw std::invalid_argument("stack_effective: empty user list");
  }
  const Eigen::Index m = eff.h[j][users[0]].size();
  cmat h(m, static_cast<Eigen::Index>(users.size()));
  for (std::size_t col = 0; col < users.size(); ++col) {
    h.col(static_cast<Eigen::Index>(col)) = eff.h[j][users[col]];
  }
  return h;
}

// Zero-forcing beams for every populated cell under a fixed effective
// channel set. Cells with no served users get an empty beam block.
inline BeamformerSet zf_beamformers(const AssociationState& assoc,
                                    const EffectiveChannelSet& eff,
                                    double p_max, int total_users) {
  BeamformerSet beams;
  beams.users = assoc.served;
  beams.w.resize(assoc.num_bs);
  beams.per_user_power = p_max / static_cast<double>(total_users);
  for (int j = 0; j < assoc.num_bs; ++j) {
    if (assoc.served[j].empty()) {
      const Eigen::Index m = eff.h[j].empty() ? 0 : eff.h[j][0].size();
      beams.w[j] = cmat(m, 0);
      continue;
    }
    beams.w[j] =
        zf_columns(stack_effective(eff, j, assoc.served[j]), p_max, total_users);
  }
  return beams;
}

// --------------------------------------------------------------------- SINR

namespace detail {

// Neumaier-compensated accumulator; used once interference sums grow past a
// handful of terms.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

} // namespace detail

// SINR of user k under its serving BS's beams. Only same-BS beams interfere;
// the BSs operate in disjoint bands. Interference sums use compensated
// accumulation once the serving cell has more than 16 users.
inline double sinr(int k, const AssociationState& assoc,
                   const EffectiveChannelSet& eff, const BeamformerSet& beams,
                   double noise_power) {
  const int j = assoc.serving_bs(k);
  if (j < 0) {
    throw std::invalid_argument("sinr: user is not assigned to any BS");
  }
  const cvec& h = eff.h[j][k];
  const auto& users = beams.users[j];
  const bool compensate = users.size() > 16;

  double signal = 0.0;
  double interference = 0.0;
  detail::CompensatedSum comp;
  for (std::size_t col = 0; col < users.size(); ++col) {
    const complexd t = h.dot(beams.w[j].col(static_cast<Eigen::Index>(col)));
    const double p = std::norm(t);
    if (users[col] == k) {
      signal = p;
    } else if (compensate) {
      comp.add(p);
    } else {
      interference += p;
    }
  }
  if (compensate) interference = comp.value();
  return signal / (interference + noise_power);
}

// -------------------------------------------------------------------- rates

inline double rate_from_sinr(double gamma) {
  if (!(gamma >= 0.0)) {
    throw std::domain_error("rate_from_sinr: SINR must be nonnegative");
  }
  return std::log2(1.0 + gamma);
}

inline rvec per_user_rates(const AssociationState& assoc,
                           const EffectiveChannelSet& eff,
                           const BeamformerSet& beams, double noise_power) {
  if (!assoc.complete()) {
    throw std::invalid_argument("per_user_rates: association is incomplete");
  }
  rvec rates(assoc.num_users);
  for (int k = 0; k < assoc.num_users; ++k) {
    rates[k] = rate_from_sinr(sinr(k, assoc, eff, beams, noise_power));
  }
  return rates;
}

inline double sum_rate(const AssociationState& assoc,
                       const EffectiveChannelSet& eff,
                       const BeamformerSet& beams, double noise_power) {
  return per_user_rates(assoc, eff, beams, noise_power).sum();
}

} // namespace riscell
