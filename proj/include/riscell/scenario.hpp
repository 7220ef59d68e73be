// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/system_model.hpp>

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace riscell {

// Flat "key = value" text format shared by scenario and plan files.
// '#' starts a comment, blank lines are skipped, keys may appear once.

namespace kv {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(trim(s.substr(start)));
      break;
    }
    parts.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return parts;
}

inline std::vector<Entry> parse(const std::string& text) {
  std::vector<Entry> entries;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line) +
                                  ": expected 'key = value'");
    }
    Entry e;
    e.key = trim(std::string_view(stripped).substr(0, eq));
    e.value = trim(std::string_view(stripped).substr(eq + 1));
    e.line = line;
    if (e.key.empty()) {
      throw std::invalid_argument("line " + std::to_string(line) + ": empty key");
    }
    if (!seen.insert(e.key).second) {
      throw std::invalid_argument("line " + std::to_string(line) +
                                  ": duplicate key '" + e.key + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

inline double to_double(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  double out = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last || t.empty()) {
    throw std::invalid_argument("key '" + key + "': cannot parse number '" + s + "'");
  }
  return out;
}

inline long long to_int(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  long long out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("key '" + key + "': cannot parse integer '" + s + "'");
  }
  return out;
}

inline std::uint64_t to_uint64(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  std::uint64_t out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("key '" + key +
                                "': cannot parse unsigned integer '" + s + "'");
  }
  return out;
}

inline Point2 to_point(const std::string& s, const std::string& key) {
  const auto parts = split(s, ',');
  if (parts.size() != 2) {
    throw std::invalid_argument("key '" + key + "': expected 'x, y', got '" + s + "'");
  }
  return {to_double(parts[0], key), to_double(parts[1], key)};
}

inline std::vector<Point2> to_point_list(const std::string& s, const std::string& key) {
  std::vector<Point2> pts;
  for (const auto& part : split(s, ';')) {
    pts.push_back(to_point(part, key));
  }
  return pts;
}

inline RicianFactor to_rician(const std::string& s, const std::string& key) {
  std::string t = trim(s);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "inf" || t == "infinity" || t == "los") return RicianFactor::pure_los();
  return RicianFactor::finite(to_double(s, key));
}

inline bool to_bool(const std::string& s, const std::string& key) {
  std::string t = trim(s);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "on" || t == "true" || t == "1" || t == "yes") return true;
  if (t == "off" || t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("key '" + key + "': expected on/off, got '" + s + "'");
}

// Consumes entries into a key->value map and complains about nothing; the
// per-format readers below own the known-key checks.
inline std::map<std::string, std::string> to_map(const std::vector<Entry>& entries) {
  std::map<std::string, std::string> m;
  for (const auto& e : entries) m[e.key] = e.value;
  return m;
}

} // namespace kv

namespace detail {

class KvReader {
 public:
  explicit KvReader(const std::string& text) : map_(kv::to_map(kv::parse(text))) {}

  bool has(const std::string& key) const { return map_.count(key) != 0; }

  std::string take(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) {
      throw std::invalid_argument("missing required key '" + key + "'");
    }
    std::string v = it->second;
    map_.erase(it);
    return v;
  }

  std::string take_or(const std::string& key, const std::string& fallback) {
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    std::string v = it->second;
    map_.erase(it);
    return v;
  }

  // Exactly one of two alternate spellings must be present.
  std::pair<std::string, std::string> take_one_of(const std::string& a,
                                                  const std::string& b) {
    const bool ha = has(a), hb = has(b);
    if (ha && hb) {
      throw std::invalid_argument("keys '" + a + "' and '" + b +
                                  "' are alternatives; give exactly one");
    }
    if (!ha && !hb) {
      throw std::invalid_argument("missing required key: one of '" + a + "', '" +
                                  b + "'");
    }
    const std::string& key = ha ? a : b;
    return {key, take(key)};
  }

  void finish(const std::string& what) const {
    if (map_.empty()) return;
    std::string keys;
    for (const auto& [k, v] : map_) {
      if (!keys.empty()) keys += ", ";
      keys += "'" + k + "'";
    }
    throw std::invalid_argument("unknown " + what + " key(s): " + keys);
  }

 private:
  std::map<std::string, std::string> map_;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace detail

// Parses a scenario given as flat key-value text. Power keys accept watts
// (p_max_w, noise_w) or dBm (p_max_dbm, noise_dbm), exactly one spelling
// each. Path-loss, exponent, and Rician keys are optional and default to
// the reference deployment's values. The result is validated strictly.
inline SystemConfig parse_scenario(const std::string& text) {
  detail::KvReader r(text);
  SystemConfig cfg;

  cfg.num_bs = static_cast<int>(kv::to_int(r.take("num_bs"), "num_bs"));
  cfg.num_users = static_cast<int>(kv::to_int(r.take("num_users"), "num_users"));
  cfg.bs_antennas =
      static_cast<int>(kv::to_int(r.take("bs_antennas"), "bs_antennas"));
  cfg.ris_elements =
      static_cast<int>(kv::to_int(r.take("ris_elements"), "ris_elements"));
  cfg.bs_positions = kv::to_point_list(r.take("bs_positions"), "bs_positions");
  cfg.ris_position = kv::to_point(r.take("ris_position"), "ris_position");
  cfg.user_center = kv::to_point(r.take("user_center"), "user_center");
  cfg.user_radius = kv::to_double(r.take("user_radius"), "user_radius");

  {
    const auto [key, value] = r.take_one_of("p_max_w", "p_max_dbm");
    const double x = kv::to_double(value, key);
    cfg.p_max = (key == "p_max_dbm") ? dbm_to_watts(x) : x;
  }
  {
    const auto [key, value] = r.take_one_of("noise_w", "noise_dbm");
    const double x = kv::to_double(value, key);
    cfg.noise_power = (key == "noise_dbm") ? dbm_to_watts(x) : x;
  }

  cfg.pathloss_c0 = kv::to_double(r.take_or("pathloss_c0", "1e-3"), "pathloss_c0");
  cfg.pathloss_d0 = kv::to_double(r.take_or("pathloss_d0", "1"), "pathloss_d0");
  cfg.alpha_direct =
      kv::to_double(r.take_or("alpha_direct", "3.9"), "alpha_direct");
  cfg.alpha_bs_ris =
      kv::to_double(r.take_or("alpha_bs_ris", "2.5"), "alpha_bs_ris");
  cfg.alpha_ris_user =
      kv::to_double(r.take_or("alpha_ris_user", "2.7"), "alpha_ris_user");
  cfg.rician_bs_ris =
      kv::to_rician(r.take_or("rician_bs_ris", "inf"), "rician_bs_ris");
  cfg.rician_ris_user =
      kv::to_rician(r.take_or("rician_ris_user", "1"), "rician_ris_user");
  cfg.seed = kv::to_uint64(r.take_or("seed", "0"), "seed");

  r.finish("scenario");
  require_valid_config(cfg);
  return cfg;
}

inline SystemConfig load_scenario(const std::string& path) {
  return parse_scenario(detail::read_text_file(path));
}

} // namespace riscell
