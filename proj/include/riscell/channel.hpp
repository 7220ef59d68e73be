// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/system_model.hpp>

#include <cstdint>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace riscell {

// ---------------------------------------------------------------- seed tree

// Every random object gets its own engine derived from (master, tag, a, b),
// so one link's draws never shift another link's stream and regeneration is
// independent of loop order.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SeedSource {
  std::uint64_t master = 0;

  std::mt19937_64 stream(std::uint64_t tag, std::uint64_t a = 0,
                         std::uint64_t b = 0) const {
    std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (tag + 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (a + 0x6a09e667f3bcc909ULL));
    h = mix64(h ^ (b + 0xbb67ae8584caa73bULL));
    return std::mt19937_64(h);
  }
};

namespace seed_tag {
inline constexpr std::uint64_t user_positions = 1;
inline constexpr std::uint64_t direct = 2;
inline constexpr std::uint64_t bs_ris = 3;
inline constexpr std::uint64_t ris_user = 4;
inline constexpr std::uint64_t random_phase = 5;
} // namespace seed_tag

// ------------------------------------------------------------ random draws

// Standard circularly symmetric complex Gaussian: independent real and
// imaginary parts with variance 1/2 each, real part drawn first.
inline cvec draw_cn_vector(int n, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, std::numbers::sqrt2 / 2.0);
  cvec v(n);
  for (int i = 0; i < n; ++i) {
    const double re = normal(gen);
    const double im = normal(gen);
    v[i] = complexd(re, im);
  }
  return v;
}

// Column-major fill so the draw order matches Eigen's storage order.
inline cmat draw_cn_matrix(int rows, int cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, std::numbers::sqrt2 / 2.0);
  cmat m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const double re = normal(gen);
      const double im = normal(gen);
      m(r, c) = complexd(re, im);
    }
  }
  return m;
}

// ---------------------------------------------------------------- path loss

// L(d) = C0 * (d / D0)^(-alpha), a linear power gain.
inline double path_loss(double dist, double alpha, const SystemConfig& cfg) {
  if (!(dist > 0.0)) {
    throw std::domain_error("path_loss: distance must be positive");
  }
  return cfg.pathloss_c0 * std::pow(dist / cfg.pathloss_d0, -alpha);
}

// Link gain used by the generators: distances below the reference distance
// clamp to it, so a terminal on top of a node cannot out-gain the model.
inline double link_gain(double dist, double alpha, const SystemConfig& cfg) {
  return path_loss(std::max(dist, cfg.pathloss_d0), alpha, cfg);
}

// ------------------------------------------------------------ array response

// Uniform linear array at half-wavelength spacing; element n picks up phase
// pi * n * sin(azimuth).
inline cvec ula_steering(int num_elements, double azimuth) {
  if (num_elements < 0) {
    throw std::invalid_argument("ula_steering: negative element count");
  }
  cvec a(num_elements);
  const double s = std::sin(azimuth);
  for (int n = 0; n < num_elements; ++n) {
    a[n] = std::polar(1.0, std::numbers::pi * n * s);
  }
  return a;
}

inline double azimuth_from_to(const Point2& from, const Point2& to) {
  return std::atan2(to.y - from.y, to.x - from.x);
}

// ----------------------------------------------------------------- placement

// Uniform draw over the user disk: radius via sqrt of a uniform variate,
// then angle, two variates per user in that order.
inline std::vector<Point2> place_users(const SystemConfig& cfg,
                                       const SeedSource& src) {
  auto gen = src.stream(seed_tag::user_positions);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Point2> pts(cfg.num_users);
  for (auto& p : pts) {
    const double u = unif(gen);
    const double v = unif(gen);
    const double rad = cfg.user_radius * std::sqrt(u);
    const double ang = 2.0 * std::numbers::pi * v;
    p = {cfg.user_center.x + rad * std::cos(ang),
         cfg.user_center.y + rad * std::sin(ang)};
  }
  return pts;
}

// ----------------------------------------------------------------- channels

// Direct BS-user links: i.i.d. Rayleigh small-scale fading scaled by the
// alpha_direct path loss. One substream per (j, k).
inline std::vector<std::vector<cvec>> gen_direct(
    const SystemConfig& cfg, const std::vector<Point2>& users,
    const SeedSource& src) {
  if (users.size() != static_cast<std::size_t>(cfg.num_users)) {
    throw std::invalid_argument("gen_direct: user position count mismatch");
  }
  std::vector<std::vector<cvec>> h(cfg.num_bs,
                                   std::vector<cvec>(cfg.num_users));
  for (int j = 0; j < cfg.num_bs; ++j) {
    for (int k = 0; k < cfg.num_users; ++k) {
      auto gen = src.stream(seed_tag::direct, static_cast<std::uint64_t>(j),
                            static_cast<std::uint64_t>(k));
      const double g = link_gain(distance(cfg.bs_positions[j], users[k]),
                                 cfg.alpha_direct, cfg);
      h[j][k] = std::sqrt(g) * draw_cn_vector(cfg.bs_antennas, gen);
    }
  }
  return h;
}

namespace detail {

// Rician mix sqrt(k/(1+k)) * LoS + sqrt(1/(1+k)) * NLoS keeps the mean link
// power at the path-loss value for every kappa.
inline cmat rician_mix(const cmat& los, const cmat& nlos, double kappa) {
  return std::sqrt(kappa / (1.0 + kappa)) * los +
         std::sqrt(1.0 / (1.0 + kappa)) * nlos;
}

} // namespace detail

// BS-RIS links G_j (N x M). The LoS component is the rank-1 outer product
// of the two array responses along the BS-RIS ray; kappa = infinity keeps
// only that component.
inline std::vector<cmat> gen_bs_ris(const SystemConfig& cfg,
                                    const SeedSource& src) {
  std::vector<cmat> g_all(cfg.num_bs);
  for (int j = 0; j < cfg.num_bs; ++j) {
    const Point2 bs = cfg.bs_positions[j];
    const double gain =
        link_gain(distance(bs, cfg.ris_position), cfg.alpha_bs_ris, cfg);
    const cvec at_ris =
        ula_steering(cfg.ris_elements, azimuth_from_to(cfg.ris_position, bs));
    const cvec at_bs =
        ula_steering(cfg.bs_antennas, azimuth_from_to(bs, cfg.ris_position));
    const cmat los = at_ris * at_bs.adjoint();
    if (cfg.rician_bs_ris.is_pure_los()) {
      g_all[j] = std::sqrt(gain) * los;
    } else {
      auto gen = src.stream(seed_tag::bs_ris, static_cast<std::uint64_t>(j));
      const cmat nlos = draw_cn_matrix(cfg.ris_elements, cfg.bs_antennas, gen);
      g_all[j] =
          std::sqrt(gain) * detail::rician_mix(los, nlos, cfg.rician_bs_ris.kappa());
    }
  }
  return g_all;
}

// RIS-user links h_r,k (N). Rician with the RIS-side array response as the
// LoS part. One substream per user.
inline std::vector<cvec> gen_ris_user(const SystemConfig& cfg,
                                      const std::vector<Point2>& users,
                                      const SeedSource& src) {
  if (users.size() != static_cast<std::size_t>(cfg.num_users)) {
    throw std::invalid_argument("gen_ris_user: user position count mismatch");
  }
  std::vector<cvec> h(cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k) {
    const double gain = link_gain(distance(cfg.ris_position, users[k]),
                                  cfg.alpha_ris_user, cfg);
    const cvec los = ula_steering(
        cfg.ris_elements, azimuth_from_to(cfg.ris_position, users[k]));
    if (cfg.rician_ris_user.is_pure_los()) {
      h[k] = std::sqrt(gain) * los;
    } else {
      auto gen = src.stream(seed_tag::ris_user, static_cast<std::uint64_t>(k));
      const cvec nlos = draw_cn_vector(cfg.ris_elements, gen);
      h[k] = std::sqrt(gain) *
             detail::rician_mix(los, nlos, cfg.rician_ris_user.kappa());
    }
  }
  return h;
}

// ---------------------------------------------------------------- ChannelSet

// One full random draw of the network: user drop plus every link of all
// three kinds.
struct ChannelSet {
  int num_bs = 0;
  int num_users = 0;
  int bs_antennas = 0;
  int ris_elements = 0;
  std::vector<Point2> user_positions;        // K
  std::vector<std::vector<cvec>> h_direct;   // [J][K], each M x 1
  std::vector<cmat> g_bs_ris;                // [J], each N x M
  std::vector<cvec> h_ris_user;              // [K], each N x 1

  bool dims_match(const SystemConfig& cfg) const {
    return num_bs == cfg.num_bs && num_users == cfg.num_users &&
           bs_antennas == cfg.bs_antennas && ris_elements == cfg.ris_elements;
  }
};

inline ChannelSet gen_channel_set(const SystemConfig& cfg,
                                  const SeedSource& src) {
  ChannelSet ch;
  ch.num_bs = cfg.num_bs;
  ch.num_users = cfg.num_users;
  ch.bs_antennas = cfg.bs_antennas;
  ch.ris_elements = cfg.ris_elements;
  ch.user_positions = place_users(cfg, src);
  ch.h_direct = gen_direct(cfg, ch.user_positions, src);
  ch.g_bs_ris = gen_bs_ris(cfg, src);
  ch.h_ris_user = gen_ris_user(cfg, ch.user_positions, src);
  return ch;
}

inline ChannelSet gen_channel_set(const SystemConfig& cfg) {
  return gen_channel_set(cfg, SeedSource{cfg.seed});
}

// ------------------------------------------------------------- persistence

// Text dump with full double precision; load() reproduces the set exactly.

namespace detail {

inline void put_double(std::ostream& out, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out << buf;
}

inline void put_cvec(std::ostream& out, const cvec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << ' ';
    put_double(out, v[i].real());
    out << ' ';
    put_double(out, v[i].imag());
  }
}

inline double get_double(std::istream& in, const char* what) {
  double x = 0.0;
  if (!(in >> x)) {
    throw std::runtime_error(std::string("channel dump: truncated ") + what);
  }
  return x;
}

inline void get_cvec(std::istream& in, cvec& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = get_double(in, what);
    const double im = get_double(in, what);
    v[i] = complexd(re, im);
  }
}

} // namespace detail

inline void dump_channels(std::ostream& out, const ChannelSet& ch) {
  out << "riscell channels v1\n";
  out << "dims " << ch.num_bs << ' ' << ch.num_users << ' ' << ch.bs_antennas
      << ' ' << ch.ris_elements << '\n';
  for (int k = 0; k < ch.num_users; ++k) {
    out << "user " << k << ' ';
    detail::put_double(out, ch.user_positions[k].x);
    out << ' ';
    detail::put_double(out, ch.user_positions[k].y);
    out << '\n';
  }
  for (int j = 0; j < ch.num_bs; ++j) {
    for (int k = 0; k < ch.num_users; ++k) {
      out << "h_direct " << j << ' ' << k;
      detail::put_cvec(out, ch.h_direct[j][k]);
      out << '\n';
    }
  }
  for (int j = 0; j < ch.num_bs; ++j) {
    for (int r = 0; r < ch.ris_elements; ++r) {
      out << "g_bs_ris " << j << ' ' << r;
      detail::put_cvec(out, ch.g_bs_ris[j].row(r).transpose());
      out << '\n';
    }
  }
  for (int k = 0; k < ch.num_users; ++k) {
    out << "h_ris_user " << k;
    detail::put_cvec(out, ch.h_ris_user[k]);
    out << '\n';
  }
  out << "end\n";
}

inline ChannelSet load_channels(std::istream& in) {
  std::string word;
  std::getline(in, word);
  if (word != "riscell channels v1") {
    throw std::runtime_error("channel dump: bad header line");
  }
  auto expect = [&in](const char* token) {
    std::string w;
    if (!(in >> w) || w != token) {
      throw std::runtime_error(std::string("channel dump: expected '") + token + "'");
    }
  };
  auto expect_index = [&in](int want, const char* what) {
    int got = -1;
    if (!(in >> got) || got != want) {
      throw std::runtime_error(std::string("channel dump: bad index for ") + what);
    }
  };

  ChannelSet ch;
  expect("dims");
  if (!(in >> ch.num_bs >> ch.num_users >> ch.bs_antennas >> ch.ris_elements)) {
    throw std::runtime_error("channel dump: bad dims line");
  }
  if (ch.num_bs < 1 || ch.num_users < 1 || ch.bs_antennas < 1 ||
      ch.ris_elements < 0) {
    throw std::runtime_error("channel dump: nonsensical dims");
  }

  ch.user_positions.resize(ch.num_users);
  for (int k = 0; k < ch.num_users; ++k) {
    expect("user");
    expect_index(k, "user");
    ch.user_positions[k].x = detail::get_double(in, "user position");
    ch.user_positions[k].y = detail::get_double(in, "user position");
  }
  ch.h_direct.assign(ch.num_bs, std::vector<cvec>(ch.num_users));
  for (int j = 0; j < ch.num_bs; ++j) {
    for (int k = 0; k < ch.num_users; ++k) {
      expect("h_direct");
      expect_index(j, "h_direct");
      expect_index(k, "h_direct");
      ch.h_direct[j][k].resize(ch.bs_antennas);
      detail::get_cvec(in, ch.h_direct[j][k], "h_direct");
    }
  }
  ch.g_bs_ris.assign(ch.num_bs, cmat(ch.ris_elements, ch.bs_antennas));
  cvec row(ch.bs_antennas);
  for (int j = 0; j < ch.num_bs; ++j) {
    for (int r = 0; r < ch.ris_elements; ++r) {
      expect("g_bs_ris");
      expect_index(j, "g_bs_ris");
      expect_index(r, "g_bs_ris");
      detail::get_cvec(in, row, "g_bs_ris");
      ch.g_bs_ris[j].row(r) = row.transpose();
    }
  }
  ch.h_ris_user.assign(ch.num_users, cvec(ch.ris_elements));
  for (int k = 0; k < ch.num_users; ++k) {
    expect("h_ris_user");
    expect_index(k, "h_ris_user");
    detail::get_cvec(in, ch.h_ris_user[k], "h_ris_user");
  }
  expect("end");
  return ch;
}

} // namespace riscell
