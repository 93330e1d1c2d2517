#include <doctest.h>

#include "coadapt/protocol.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace coadapt;
using coadapt::testing::bundled;
using coadapt::testing::vec;

TEST_CASE("session plans cover every rate and symmetry once") {
  const auto g22 = bundled("2x2").params;
  const auto plan = build_session(GameVersion::k2x2, DisplayMode::kCostCircle, 42, "p1", g22);
  REQUIRE(plan.trials.size() == 20);

  std::map<double, int> per_rate;
  std::set<std::pair<double, SignVector>> pairs;
  for (const auto& t : plan.trials) {
    ++per_rate[t.alpha];
    pairs.insert({t.alpha, t.symmetry});
    CHECK(t.duration_s == 25.0);
    CHECK(t.sample_hz == 60);
    CHECK(t.sample_count() == 1500);
  }
  CHECK(pairs.size() == 20);
  for (double a : kExperimentRates) CHECK(per_rate[a] == 4);

  // Constant-policy trials start at m^NE, the rest at 0.1.
  const Vector m_ne = solve_nash(g22).m;
  for (const auto& t : plan.trials) {
    CHECK(t.m0 == (t.alpha == 0.0 ? m_ne : vec({0.1, 0.1})));
  }

  const auto plan12 =
      build_session(GameVersion::k1x2, DisplayMode::kCostCircle, 1, "p2", bundled("1x2").params);
  CHECK(plan12.trials.size() == 10);
  const auto plan21 =
      build_session(GameVersion::k2x1, DisplayMode::kCostCircle, 1, "p3", bundled("2x1").params);
  CHECK(plan21.trials.size() == 20);
  CHECK(plan21.trials.front().m0.size() == 1);
}

TEST_CASE("session shuffling is a seeded permutation") {
  const auto g22 = bundled("2x2").params;
  const auto a = build_session(GameVersion::k2x2, DisplayMode::kHeatmap, 9, "k", g22);
  const auto b = build_session(GameVersion::k2x2, DisplayMode::kHeatmap, 9, "k", g22);
  const auto c = build_session(GameVersion::k2x2, DisplayMode::kHeatmap, 10, "k", g22);
  CHECK(session_to_json(a) == session_to_json(b));
  CHECK(session_to_json(a) != session_to_json(c));
  CHECK(a.trials.front().sample_hz == 24);

  // Same multiset for every seed.
  auto key = [](const SessionPlan& p) {
    std::vector<std::pair<double, SignVector>> v;
    for (const auto& t : p.trials) v.emplace_back(t.alpha, t.symmetry);
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(key(a) == key(c));
}

TEST_CASE("session validation and serialization") {
  const auto g12 = bundled("1x2").params;
  CHECK_THROWS_AS(build_session(GameVersion::k1x2, DisplayMode::kHeatmap, 0, "k", g12),
                  std::invalid_argument);
  CHECK_NOTHROW(build_session(GameVersion::k1x2, DisplayMode::kHeatmap, 0, "k", g12, true));
  CHECK_THROWS_AS(build_session(GameVersion::k2x2, DisplayMode::kCostCircle, 0, "k", g12),
                  DimensionError);
  CHECK_THROWS_AS(parse_game_version("3x3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_display_mode("bars"), std::invalid_argument);

  const auto plan = build_session(GameVersion::k2x2, DisplayMode::kCostCircle, 5, "abc",
                                  bundled("2x2").params);
  const auto back = session_from_json(nlohmann::json::parse(session_to_json(plan).dump()));
  CHECK(session_to_json(back) == session_to_json(plan));
  CHECK(back.trials[3].m0 == plan.trials[3].m0);
}

TEST_CASE("mirror") {
  CHECK(apply_mirror({1, 1}, vec({0.3, -0.2})) == vec({0.3, -0.2}));
  CHECK(apply_mirror({-1, 1}, vec({0.3, -0.2})) == vec({-0.3, -0.2}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& s : symmetry_variants(2)) {
    const Vector x = vec({u(rng), u(rng)});
    CHECK(apply_mirror(s, apply_mirror(s, x)) == x);
  }
  CHECK_THROWS(apply_mirror({1}, vec({0.1, 0.2})));
  CHECK(symmetry_variants(1).size() == 2);
  CHECK(symmetry_variants(2).front() == SignVector{1, 1});
}

TEST_CASE("mirrored trial equals identity trial on mirrored input") {
  const auto g = bundled("2x2").params;
  const AiRule rule(g);
  std::vector<Vector> raw;
  for (int k = 0; k < 1500; ++k) {
    raw.push_back(vec({std::sin(k * 0.01) * 0.8, std::cos(k * 0.013) * 0.6}));
  }
  TrialConfig cfg;
  cfg.alpha = 0.1;
  cfg.symmetry = {-1, 1};
  cfg.m0 = vec({0.1, 0.1});
  const auto mirrored = run_trial(rule, cfg, raw, "k", 0);

  std::vector<Vector> pre;
  for (const auto& r : raw) pre.push_back(apply_mirror(cfg.symmetry, r));
  TrialConfig ident = cfg;
  ident.symmetry = {1, 1};
  const auto plain = run_trial(rule, ident, pre, "k", 0);

  REQUIRE(mirrored.samples.size() == 1500);
  for (std::size_t i = 0; i < plain.samples.size(); ++i) {
    CHECK(mirrored.samples[i].h == raw[i]);
    CHECK(apply_mirror(cfg.symmetry, mirrored.samples[i].h) == plain.samples[i].h);
    CHECK(mirrored.samples[i].m == plain.samples[i].m);
    CHECK(mirrored.samples[i].cost_H == plain.samples[i].cost_H);
  }
}

TEST_CASE("trial replay follows the AI rule") {
  const auto g = bundled("2x2").params;
  const AiRule rule(g);
  const std::vector<Vector> raw{vec({0.2, 0.4}), vec({-0.5, 0.1}), vec({0.3, 0.3})};
  TrialConfig cfg;
  cfg.symmetry = {1, 1};
  cfg.m0 = vec({0.1, 0.1});

  cfg.alpha = 1.0;
  const auto br = run_trial(rule, cfg, raw, "k", 2);
  CHECK(br.samples.size() == 1500);
  CHECK(br.samples[1].m == best_response_M(g, raw[0]));
  CHECK(br.samples[2].m == best_response_M(g, raw[1]));
  // Inputs past the end hold the last value.
  CHECK(br.samples[1499].h == raw[2]);

  cfg.alpha = 0.0;
  cfg.m0 = solve_nash(g).m;
  const auto constant = run_trial(rule, cfg, raw, "k", 2);
  for (const auto& s : constant.samples) CHECK(s.m == cfg.m0);

  CHECK(br.samples[1].t == doctest::Approx(1.0 / 60));
  CHECK(br.samples[0].cost_H == cost_H(g, {raw[0], cfg.m0 = vec({0.1, 0.1})}));
}

TEST_CASE("cursor mapping") {
  const double w = 800, h = 600;
  CHECK(cursor_to_action(0, h, w, h) == Eigen::Vector2d(-1, -1));
  CHECK(cursor_to_action(w, 0, w, h) == Eigen::Vector2d(1, 1));
  CHECK(cursor_to_action(w / 2, h / 2, w, h) == Eigen::Vector2d(0, 0));
  CHECK(cursor_to_action(-50, 2 * h, w, h) == Eigen::Vector2d(-1, -1));
  CHECK(cursor_to_human_action(w, 0, w, h, 1) == vec({1.0}));
  CHECK_THROWS(cursor_to_action(1, 1, 0, h));
  const Eigen::Vector2d a(0.3, -0.4);
  const auto px = action_to_cursor(a, w, h);
  CHECK((cursor_to_action(px.x(), px.y(), w, h) - a).norm() < 1e-15);
}

TEST_CASE("heat-map grid") {
  const auto g = bundled("2x2").params;
  const Vector h = vec({0.1, -0.2});
  const Vector m = vec({0.1, 0.1});
  const auto grid = heatmap_grid(g, h, m);
  CHECK(grid.size() == 49);
  CHECK(grid[24].offset == Eigen::Vector2d(0, 0));
  CHECK(grid[24].cost == cost_H(g, {h, m}));
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 7; ++c) {
      const auto& cell = grid[static_cast<std::size_t>(r * 7 + c)];
      CHECK(cell.offset.cwiseAbs().maxCoeff() <= 0.15 + 1e-15);
      if (c > 0) {
        CHECK(cell.offset.x() - grid[static_cast<std::size_t>(r * 7 + c - 1)].offset.x() ==
              doctest::Approx(0.05).epsilon(1e-12));
      }
      if (r > 0) {
        CHECK(cell.offset.y() - grid[static_cast<std::size_t>((r - 1) * 7 + c)].offset.y() ==
              doctest::Approx(0.05).epsilon(1e-12));
      }
      CHECK(cell.cost == cost_H(g, {h + cell.offset, m}));
    }
  }
  CHECK_THROWS_AS(heatmap_grid(bundled("1x2").params, vec({0.0}), vec({0.0, 0.0})),
                  DimensionError);
}

TEST_CASE("heat-map minimum sits on the boundary far from the slice minimizer") {
  const auto g = bundled("2x2").params;
  const Vector h = vec({0.9, 0.9});
  const Vector m = vec({0.1, 0.1});
  const auto grid = heatmap_grid(g, h, m);
  // Brute force over the 49 probes.
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i].cost < grid[best].cost) best = i;
  }
  const auto r = best / 7;
  const auto c = best % 7;
  CHECK((r == 0 || r == 6 || c == 0 || c == 6));
  CHECK(grid[best].offset == Eigen::Vector2d(-0.15, -0.15));
}

TEST_CASE("display transforms") {
  CHECK(circle_radius(0.0, 10.0, 5.0, 100.0) == 5.0);
  CHECK(circle_radius(-3.0, 10.0, 5.0, 100.0) == 5.0);
  CHECK(circle_radius(4.0, 10.0, 5.0, 100.0) - circle_radius(2.0, 10.0, 5.0, 100.0) ==
        doctest::Approx(20.0));
  CHECK(circle_radius(1e9, 10.0, 5.0, 100.0) == 100.0);

  CHECK(cost_to_shade(1.0, 1.0, 3.0) == 1.0);
  CHECK(cost_to_shade(3.0, 1.0, 3.0) == 0.0);
  CHECK(cost_to_shade(2.0, 1.0, 3.0) == 0.5);
  CHECK_THROWS(cost_to_shade(2.0, 3.0, 3.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(circle_radius(a, 7.0, 2.0, 30.0) <= circle_radius(b, 7.0, 2.0, 30.0));
    if (a < b && a > -1 && b < 1) {
      CHECK(cost_to_shade(a, -1, 1) > cost_to_shade(b, -1, 1));
    }
  }
}

TEST_CASE("display scale spans the cost over the action box") {
  const auto g = bundled("2x2").params;
  const auto s = compute_display_scale(g);
  CHECK(s.cost_lo < s.cost_hi);
  CHECK(s.radius_scale == doctest::Approx((s.r_max - s.r_min) / (s.cost_hi - s.cost_lo)));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 2000; ++i) {
    const double c = cost_H(g, {vec({u(rng), u(rng)}), vec({u(rng), u(rng)})});
    CHECK(c >= s.cost_lo - 1e-12);
    CHECK(c <= s.cost_hi + 1e-12);
  }
}

TEST_CASE("trial record json") {
  const auto g = bundled("2x2").params;
  TrialConfig cfg;
  cfg.alpha = 0.01;
  cfg.symmetry = {1, -1};
  cfg.m0 = vec({0.1, 0.1});
  cfg.duration_s = 1.0;
  const auto rec = run_trial(AiRule(g), cfg, {vec({0.1234567890123, -0.3})}, "pk", 4, "s1");
  const auto back = record_from_json(nlohmann::json::parse(record_to_json(rec).dump()));
  CHECK(back.participant_key == "pk");
  CHECK(back.session_id == "s1");
  CHECK(back.trial_index == 4);
  CHECK(back.symmetry == SignVector{1, -1});
  REQUIRE(back.samples.size() == 60);
  for (std::size_t i = 0; i < 60; ++i) {
    CHECK(back.samples[i].t == rec.samples[i].t);
    CHECK(back.samples[i].h == rec.samples[i].h);
    CHECK(back.samples[i].m == rec.samples[i].m);
    CHECK(back.samples[i].cost_M == rec.samples[i].cost_M);
  }

  auto j = record_to_json(rec);
  SUBCASE("missing key") {
    j.erase("participant_key");
    CHECK_THROWS_AS(record_from_json(j), RecordFormatError);
  }
  SUBCASE("time not increasing") {
    j["samples"][5]["t"] = 0.0;
    CHECK_THROWS_AS(record_from_json(j), RecordFormatError);
  }
  SUBCASE("bad symmetry") {
    j["symmetry"] = {1, 0};
    CHECK_THROWS_AS(record_from_json(j), RecordFormatError);
  }
  SUBCASE("h length mismatch") {
    j["samples"][0]["h"] = {0.1};
    CHECK_THROWS_AS(record_from_json(j), RecordFormatError);
  }
}
