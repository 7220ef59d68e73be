// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#include <riscell/experiments.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace riscell;
using Catch::Matchers::ContainsSubstring;

namespace {

template <typename A, typename B>
bool exact_equal(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         a.cwiseEqual(b).all();
}

SystemConfig small_net(std::uint64_t seed) {
  SystemConfig cfg;
  cfg.num_bs = 2;
  cfg.num_users = 4;
  cfg.bs_antennas = 4;
  cfg.ris_elements = 8;
  cfg.bs_positions = {{0.0, 100.0}, {0.0, -100.0}};
  cfg.ris_position = {0.0, 0.0};
  cfg.user_center = {30.0, -10.0};
  cfg.user_radius = 40.0;
  cfg.p_max = 10.0;
  cfg.noise_power = 1e-10;
  cfg.seed = seed;
  return cfg;
}

// Hand-built direct-only channels with prescribed per-(BS, user) gains.
ChannelSet gain_channels(int num_bs, int num_users, int antennas,
                         const std::vector<std::vector<double>>& amp) {
  ChannelSet ch;
  ch.num_bs = num_bs;
  ch.num_users = num_users;
  ch.bs_antennas = antennas;
  ch.ris_elements = 0;
  ch.user_positions.assign(num_users, Point2{0.0, 0.0});
  ch.h_direct.assign(num_bs, std::vector<cvec>(num_users));
  for (int j = 0; j < num_bs; ++j) {
    for (int k = 0; k < num_users; ++k) {
      cvec h = cvec::Zero(antennas);
      h[k % antennas] = complexd(amp[j][k], 0.0);
      ch.h_direct[j][k] = h;
    }
  }
  ch.g_bs_ris.assign(num_bs, cmat(0, antennas));
  ch.h_ris_user.assign(num_users, cvec(0));
  return ch;
}

std::filesystem::path fresh_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

constexpr const char* kScenarioText =
    "num_bs = 2\n"
    "num_users = 4\n"
    "bs_antennas = 4\n"
    "ris_elements = 8\n"
    "bs_positions = 0, 100; 0, -100\n"
    "ris_position = 0, 0\n"
    "user_center = 30, -10\n"
    "user_radius = 40\n"
    "p_max_dbm = 40\n"
    "noise_dbm = -90\n"
    "seed = 5\n";

} // namespace

TEST_CASE("method names round-trip and order canonically", "[experiments]") {
  const std::vector<std::string> names = {
      "proposed/ris_optimized",   "proposed/ris_random",
      "proposed/ris_none",        "gain_based/ris_optimized",
      "gain_based/ris_random",    "gain_based/ris_none"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Method m = parse_method(names[i]);
    REQUIRE(to_string(m) == names[i]);
    REQUIRE(method_order(m) == static_cast<int>(i));
  }
  REQUIRE(to_string(parse_method("  proposed/ris_none ")) ==
          "proposed/ris_none");
  REQUIRE_THROWS_WITH(parse_method("proposed/ris_tuned"),
                      ContainsSubstring("unknown method"));
  REQUIRE_THROWS_WITH(parse_method(""), ContainsSubstring("unknown method"));
}

TEST_CASE("gain-based association picks the strongest BS", "[experiments]") {
  // users 0, 1 strongest at BS 0; users 2, 3 at BS 1; user 3 exactly tied
  const ChannelSet ch = gain_channels(2, 4, 4,
                                      {{3.0, 2.0, 0.5, 1.0},
                                       {1.0, 0.5, 3.0, 1.0}});
  const SystemConfig cfg = [&] {
    SystemConfig c = small_net(0);
    c.ris_elements = 0;
    return c;
  }();
  const AssociationState assoc = gain_based_association(ch, cfg);
  REQUIRE(assoc.serving_bs(0) == 0);
  REQUIRE(assoc.serving_bs(1) == 0);
  REQUIRE(assoc.serving_bs(2) == 1);
  REQUIRE(assoc.serving_bs(3) == 0); // tie toward the lower BS index
  REQUIRE(assoc.complete());
  REQUIRE(assoc.consistent());
}

TEST_CASE("an empty BS takes the weakest user", "[experiments]") {
  // every user prefers BS 0; the weakest assigned user (2) must move
  const ChannelSet ch = gain_channels(2, 3, 4,
                                      {{3.0, 2.0, 1.0},
                                       {0.1, 0.1, 0.1}});
  SystemConfig cfg = small_net(0);
  cfg.num_users = 3;
  cfg.ris_elements = 0;
  const AssociationState assoc = gain_based_association(ch, cfg);
  REQUIRE(assoc.served[0] == std::vector<int>{0, 1});
  REQUIRE(assoc.served[1] == std::vector<int>{2});
}

TEST_CASE("an over-capacity BS sheds weakest users", "[experiments]") {
  // M = 2: BS 0 attracts everyone, gives up user 3 to the empty repair and
  // user 2 to the capacity repair
  const ChannelSet ch = gain_channels(2, 4, 2,
                                      {{10.0, 9.0, 8.0, 7.0},
                                       {0.2, 0.2, 0.2, 0.2}});
  SystemConfig cfg = small_net(0);
  cfg.bs_antennas = 2;
  cfg.ris_elements = 0;
  const AssociationState assoc = gain_based_association(ch, cfg);
  REQUIRE(assoc.served[0] == std::vector<int>{0, 1});
  REQUIRE(assoc.served[1] == std::vector<int>{3, 2});
  REQUIRE(static_cast<int>(assoc.served[0].size()) <= cfg.bs_antennas);
  REQUIRE(static_cast<int>(assoc.served[1].size()) <= cfg.bs_antennas);
}

TEST_CASE("impossible repairs are reported", "[experiments]") {
  SECTION("empty BS with nothing to move") {
    const ChannelSet ch = gain_channels(2, 1, 4, {{1.0}, {0.5}});
    SystemConfig cfg = small_net(0);
    cfg.num_users = 1;
    cfg.ris_elements = 0;
    REQUIRE_THROWS_WITH(gain_based_association(ch, cfg),
                        ContainsSubstring("cannot repair"));
  }
  SECTION("demand above total capacity") {
    const ChannelSet ch = gain_channels(2, 3, 1,
                                        {{3.0, 2.0, 1.0}, {0.1, 0.1, 0.1}});
    SystemConfig cfg = small_net(0);
    cfg.num_users = 3;
    cfg.bs_antennas = 1;
    cfg.ris_elements = 0;
    REQUIRE_THROWS_WITH(gain_based_association(ch, cfg),
                        ContainsSubstring("spare ZF capacity"));
  }
}

TEST_CASE("random profiles are seeded, unit-modulus, and per-BS",
          "[experiments]") {
  const SystemConfig cfg = small_net(9);
  const auto a = random_phase_profiles(cfg);
  const auto b = random_phase_profiles(cfg);
  REQUIRE(a.size() == 2);
  for (int j = 0; j < 2; ++j) {
    REQUIRE(a[j].size() == cfg.ris_elements);
    REQUIRE(exact_equal(a[j], b[j]));
    for (int n = 0; n < cfg.ris_elements; ++n) {
      REQUIRE_THAT(std::abs(a[j][n]),
                   Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
  }
  REQUIRE_FALSE(exact_equal(a[0], a[1]));
  SystemConfig other = cfg;
  other.seed = 10;
  REQUIRE_FALSE(exact_equal(random_phase_profiles(other)[0], a[0]));
}

TEST_CASE("run_method wires the three RIS modes correctly", "[experiments]") {
  const SystemConfig cfg = small_net(17);
  const ChannelSet ch = gen_channel_set(cfg);

  SECTION("ris_none equals solving severed channels under neutral profiles") {
    ChannelSet severed = ch;
    for (auto& g : severed.g_bs_ris) g.setZero();
    const NetworkSolution want = solve(
        cfg, severed, {}, PhasePolicy::neutral(cfg.num_bs, cfg.ris_elements));
    const NetworkSolution got =
        run_method({AssocMethod::proposed, RisMode::none}, ch, cfg);
    REQUIRE(got.sum_rate == want.sum_rate);
    REQUIRE(got.assoc.u == want.assoc.u);
    for (const PhaseProfile& p : got.profiles) {
      REQUIRE(exact_equal(p.phases, cvec::Ones(cfg.ris_elements)));
    }
  }
  SECTION("ris_none ignores the reflected-path channels entirely") {
    ChannelSet mutated = ch;
    for (auto& h : mutated.h_ris_user) h *= complexd(-3.0, 4.0);
    const NetworkSolution a =
        run_method({AssocMethod::proposed, RisMode::none}, ch, cfg);
    const NetworkSolution b =
        run_method({AssocMethod::proposed, RisMode::none}, mutated, cfg);
    REQUIRE(a.sum_rate == b.sum_rate);
    REQUIRE(a.assoc.u == b.assoc.u);
  }
  SECTION("ris_random equals solving under the frozen profiles") {
    const auto frozen = random_phase_profiles(cfg);
    const NetworkSolution want =
        solve(cfg, ch, {}, PhasePolicy::fixed_profiles(frozen));
    const NetworkSolution got =
        run_method({AssocMethod::proposed, RisMode::random}, ch, cfg);
    REQUIRE(got.sum_rate == want.sum_rate);
    REQUIRE(got.assoc.u == want.assoc.u);
    const int assisted = got.ris.assisted();
    REQUIRE(exact_equal(got.profiles[assisted].phases, frozen[assisted]));
    REQUIRE(got.stats.fp_outer_iters ==
            std::vector<int>(cfg.num_bs, 0)); // optimizer never ran
  }
  SECTION("gain_based keeps its association through the pipeline") {
    const AssociationState assoc = gain_based_association(ch, cfg);
    const NetworkSolution want = complete_from_association(assoc, ch, cfg);
    const NetworkSolution got =
        run_method({AssocMethod::gain_based, RisMode::optimized}, ch, cfg);
    REQUIRE(got.sum_rate == want.sum_rate);
    REQUIRE(got.assoc.u == assoc.u);
  }
}

TEST_CASE("ris_none results do not depend on the surface size",
          "[experiments]") {
  // Substream seeding keeps the direct draws identical across N, and with
  // the surface severed nothing else enters the rates.
  SystemConfig big = small_net(23);
  SystemConfig tiny = small_net(23);
  tiny.ris_elements = 2;
  const NetworkSolution a = run_method({AssocMethod::proposed, RisMode::none},
                                       gen_channel_set(big), big);
  const NetworkSolution b = run_method({AssocMethod::proposed, RisMode::none},
                                       gen_channel_set(tiny), tiny);
  REQUIRE(a.sum_rate == b.sum_rate);
  REQUIRE(a.assoc.u == b.assoc.u);
}

TEST_CASE("apply_sweep touches exactly one dimension", "[experiments]") {
  const SystemConfig base = small_net(0);
  REQUIRE(apply_sweep(base, 'M', 16).bs_antennas == 16);
  REQUIRE(apply_sweep(base, 'M', 16).ris_elements == base.ris_elements);
  REQUIRE(apply_sweep(base, 'N', 32).ris_elements == 32);
  REQUIRE(apply_sweep(base, 'K', 3).num_users == 3);
  REQUIRE_THROWS_AS(apply_sweep(base, 'J', 2), std::invalid_argument);
}

TEST_CASE("plan validation rejects broken plans", "[experiments]") {
  ExperimentPlan plan;
  plan.base = small_net(1);
  plan.sweep_var = 'N';
  plan.sweep_values = {4, 8};
  plan.drops = 2;
  plan.methods = {{AssocMethod::proposed, RisMode::optimized}};
  REQUIRE(validate_plan(plan).ok());

  ExperimentPlan bad = plan;
  bad.sweep_var = 'Q';
  REQUIRE_THAT(validate_plan(bad).str(), ContainsSubstring("one of M, N, K"));

  bad = plan;
  bad.sweep_values.clear();
  REQUIRE_FALSE(validate_plan(bad).ok());

  bad = plan;
  bad.drops = 0;
  REQUIRE_THAT(validate_plan(bad).str(), ContainsSubstring("drops"));

  bad = plan;
  bad.methods.push_back(bad.methods.front());
  REQUIRE_THAT(validate_plan(bad).str(), ContainsSubstring("duplicate method"));

  bad = plan;
  bad.sweep_values = {4, -2};
  REQUIRE_THAT(validate_plan(bad).str(), ContainsSubstring("not positive"));

  bad = plan;
  bad.sweep_var = 'K';
  bad.sweep_values = {40}; // beyond J * M capacity
  REQUIRE_THAT(validate_plan(bad).str(), ContainsSubstring("capacity"));
}

TEST_CASE("plan files parse with scenario resolution", "[experiments]") {
  const auto dir = fresh_dir("riscell_plan_test");
  write_file(dir / "base.scn", kScenarioText);
  write_file(dir / "sweep.plan",
             "# comment lines are fine\n"
             "scenario = base.scn\n"
             "sweep = N\n"
             "values = 4, 8\n"
             "drops = 2\n"
             "methods = proposed/ris_optimized, gain_based/ris_none\n"
             "output_dir = out\n"
             "timing = on\n");

  const ExperimentPlan plan = load_plan((dir / "sweep.plan").string());
  REQUIRE(plan.base.num_users == 4);
  REQUIRE(plan.base.seed == 5);
  REQUIRE_THAT(plan.base.p_max, Catch::Matchers::WithinRel(10.0, 1e-12));
  REQUIRE(plan.sweep_var == 'N');
  REQUIRE(plan.sweep_values == std::vector<int>{4, 8});
  REQUIRE(plan.drops == 2);
  REQUIRE(plan.methods.size() == 2);
  REQUIRE(to_string(plan.methods[0]) == "proposed/ris_optimized");
  REQUIRE(to_string(plan.methods[1]) == "gain_based/ris_none");
  REQUIRE(plan.output_dir == "out");
  REQUIRE(plan.timing);

  SECTION("defaults for optional keys") {
    write_file(dir / "tiny.plan",
               "scenario = base.scn\nsweep = M\nvalues = 4\ndrops = 1\n"
               "methods = proposed/ris_none\n");
    const ExperimentPlan tiny = load_plan((dir / "tiny.plan").string());
    REQUIRE(tiny.output_dir == ".");
    REQUIRE_FALSE(tiny.timing);
  }
  SECTION("absolute scenario paths are honored") {
    write_file(dir / "abs.plan",
               "scenario = " + (dir / "base.scn").string() +
                   "\nsweep = M\nvalues = 4\ndrops = 1\n"
                   "methods = proposed/ris_none\n");
    REQUIRE(load_plan((dir / "abs.plan").string()).base.num_bs == 2);
  }
  SECTION("strict key checking") {
    write_file(dir / "bad.plan",
               "scenario = base.scn\nsweep = N\nvalues = 4\ndrops = 1\n"
               "methods = proposed/ris_none\nbudget = 7\n");
    REQUIRE_THROWS_WITH(load_plan((dir / "bad.plan").string()),
                        ContainsSubstring("unknown"));
    write_file(dir / "missing.plan",
               "scenario = base.scn\nsweep = N\nvalues = 4\n"
               "methods = proposed/ris_none\n");
    REQUIRE_THROWS_WITH(load_plan((dir / "missing.plan").string()),
                        ContainsSubstring("drops"));
    write_file(dir / "badmethod.plan",
               "scenario = base.scn\nsweep = N\nvalues = 4\ndrops = 1\n"
               "methods = proposed/ris_perfect\n");
    REQUIRE_THROWS_WITH(load_plan((dir / "badmethod.plan").string()),
                        ContainsSubstring("unknown method"));
    write_file(dir / "badsweep.plan",
               "scenario = base.scn\nsweep = X\nvalues = 4\ndrops = 1\n"
               "methods = proposed/ris_none\n");
    REQUIRE_THROWS_WITH(load_plan((dir / "badsweep.plan").string()),
                        ContainsSubstring("expected M, N, or K"));
  }
}

TEST_CASE("run_plan is deterministic and canonically ordered",
          "[experiments]") {
  ExperimentPlan plan;
  plan.base = small_net(5);
  plan.sweep_var = 'N';
  plan.sweep_values = {4, 8};
  plan.drops = 3;
  // deliberately scrambled method order
  plan.methods = {{AssocMethod::gain_based, RisMode::none},
                  {AssocMethod::proposed, RisMode::optimized},
                  {AssocMethod::proposed, RisMode::none}};

  const ResultTable serial = run_plan(plan, 1);
  REQUIRE(serial.size() == 3u * 2u * 3u);

  // canonical ordering: methods by method_order, values in plan order, drops
  std::size_t idx = 0;
  for (const char* name : {"proposed/ris_optimized", "proposed/ris_none",
                           "gain_based/ris_none"}) {
    for (int value : plan.sweep_values) {
      for (int drop = 0; drop < plan.drops; ++drop, ++idx) {
        const ResultRow& row = serial[idx];
        REQUIRE(to_string(row.method) == name);
        REQUIRE(row.sweep_var == 'N');
        REQUIRE(row.sweep_value == value);
        REQUIRE(row.drop == drop);
        REQUIRE(row.wall_ms == 0.0);
        REQUIRE(row.avg_rate ==
                row.sum_rate / static_cast<double>(plan.base.num_users));
      }
    }
  }

  // thread count must not change a single byte of the table
  const ResultTable parallel = run_plan(plan, 4);
  REQUIRE(parallel.size() == serial.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].sum_rate == parallel[i].sum_rate);
    REQUIRE(serial[i].avg_rate == parallel[i].avg_rate);
    REQUIRE(serial[i].sweep_value == parallel[i].sweep_value);
    REQUIRE(serial[i].drop == parallel[i].drop);
  }

  // method order in the plan must not matter either
  ExperimentPlan shuffled = plan;
  std::swap(shuffled.methods[0], shuffled.methods[2]);
  const ResultTable reshuffled = run_plan(shuffled, 2);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].sum_rate == reshuffled[i].sum_rate);
  }
}

TEST_CASE("run_plan rows honor the per-drop seed contract", "[experiments]") {
  ExperimentPlan plan;
  plan.base = small_net(40);
  plan.sweep_var = 'N';
  plan.sweep_values = {4, 8};
  plan.drops = 2;
  plan.methods = {{AssocMethod::proposed, RisMode::optimized}};
  const ResultTable table = run_plan(plan, 2);

  // row (vi = 1, drop = 1): recompute independently
  SystemConfig cfg = apply_sweep(plan.base, 'N', 8);
  cfg.seed = plan.base.seed + 1;
  const NetworkSolution sol =
      run_method({AssocMethod::proposed, RisMode::optimized},
                 gen_channel_set(cfg), cfg);
  const ResultRow& row = table[1 * plan.drops + 1];
  REQUIRE(row.sweep_value == 8);
  REQUIRE(row.drop == 1);
  REQUIRE(row.sum_rate == sol.sum_rate);
}

TEST_CASE("K sweeps divide by the swept user count", "[experiments]") {
  ExperimentPlan plan;
  plan.base = small_net(50);
  plan.sweep_var = 'K';
  plan.sweep_values = {2, 4};
  plan.drops = 2;
  plan.methods = {{AssocMethod::proposed, RisMode::optimized}};
  const ResultTable table = run_plan(plan, 1);
  for (const ResultRow& row : table) {
    REQUIRE(row.avg_rate ==
            row.sum_rate / static_cast<double>(row.sweep_value));
  }
}

TEST_CASE("timing mode fills wall_ms", "[experiments]") {
  ExperimentPlan plan;
  plan.base = small_net(60);
  plan.sweep_var = 'N';
  plan.sweep_values = {4};
  plan.drops = 1;
  plan.methods = {{AssocMethod::proposed, RisMode::optimized}};
  plan.timing = true;
  const ResultTable table = run_plan(plan, 1);
  REQUIRE(table.size() == 1);
  REQUIRE(table[0].wall_ms > 0.0);
}

TEST_CASE("run_plan validates its arguments", "[experiments]") {
  ExperimentPlan plan;
  plan.base = small_net(1);
  plan.sweep_var = 'N';
  plan.sweep_values = {4};
  plan.drops = 1;
  plan.methods = {{AssocMethod::proposed, RisMode::optimized}};
  REQUIRE_THROWS_AS(run_plan(plan, 0), std::invalid_argument);
  plan.methods.clear();
  REQUIRE_THROWS_WITH(run_plan(plan, 1), ContainsSubstring("invalid plan"));
}

TEST_CASE("result CSV bytes are fully pinned", "[experiments]") {
  ResultTable table(2);
  table[0].method = {AssocMethod::proposed, RisMode::optimized};
  table[0].sweep_var = 'M';
  table[0].sweep_value = 8;
  table[0].drop = 0;
  table[0].sum_rate = 1.5;
  table[0].avg_rate = 0.375;
  table[0].wall_ms = 0.0;
  table[1].method = {AssocMethod::gain_based, RisMode::none};
  table[1].sweep_var = 'M';
  table[1].sweep_value = 16;
  table[1].drop = 3;
  table[1].sum_rate = 0.015625;
  table[1].avg_rate = 0.00390625;
  table[1].wall_ms = 2.0;

  std::ostringstream out;
  write_results_csv(out, table);
  REQUIRE(out.str() ==
          "method,sweep_var,sweep_value,drop,sum_rate,avg_rate,wall_ms\n"
          "proposed/ris_optimized,M,8,0,1.500000e+00,3.750000e-01,"
          "0.000000e+00\n"
          "gain_based/ris_none,M,16,3,1.562500e-02,3.906250e-03,"
          "2.000000e+00\n");
}

TEST_CASE("emit_outputs writes the CSV and plot script", "[experiments]") {
  const auto dir = fresh_dir("riscell_emit_test");
  ResultTable table(1);
  table[0].method = {AssocMethod::proposed, RisMode::optimized};
  table[0].sweep_var = 'N';
  table[0].sweep_value = 4;
  table[0].sum_rate = 2.0;
  table[0].avg_rate = 0.5;

  const OutputPaths paths =
      emit_outputs(table, (dir / "nested" / "out").string());
  REQUIRE(std::filesystem::exists(paths.csv));
  REQUIRE(std::filesystem::exists(paths.plot));

  std::ifstream csv(paths.csv, std::ios::binary);
  std::stringstream csv_text;
  csv_text << csv.rdbuf();
  std::ostringstream want;
  write_results_csv(want, table);
  REQUIRE(csv_text.str() == want.str());

  std::ifstream plot(paths.plot, std::ios::binary);
  std::stringstream plot_text;
  plot_text << plot.rdbuf();
  REQUIRE(plot_text.str().rfind("#!/usr/bin/env python3", 0) == 0);
  REQUIRE_THAT(plot_text.str(), ContainsSubstring("results.csv"));
  REQUIRE_THAT(plot_text.str(), ContainsSubstring("results.png"));

  REQUIRE_THROWS_AS(emit_outputs({}, dir.string()), std::invalid_argument);
}
