#include <doctest.h>

#include "coadapt/game_io.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>

using namespace coadapt;
using coadapt::testing::bundled;

TEST_CASE("bundled parameter files load with the expected shapes") {
  const auto g22 = bundled("2x2");
  CHECK(g22.name == "2x2");
  CHECK(g22.params.d_H() == 2);
  CHECK(g22.params.d_M() == 2);
  CHECK(g22.params.B_H(1, 0) == 0.1182);
  CHECK(g22.params.D_M(0, 0) == 11.1467);

  const auto g12 = bundled("1x2");
  CHECK(g12.params.d_H() == 1);
  CHECK(g12.params.d_M() == 2);
  CHECK(g12.params.B_H.rows() == 1);
  CHECK(g12.params.B_H.cols() == 2);
  CHECK(g12.params.B_H(0, 1) == -0.5);

  const auto g21 = bundled("2x1");
  CHECK(g21.params.d_H() == 2);
  CHECK(g21.params.d_M() == 1);
  CHECK(g21.params.B_M.rows() == 1);
  CHECK(g21.params.B_M.cols() == 2);
}

TEST_CASE("json round trip is exact") {
  const auto g = bundled("2x2").params;
  const auto back = game_from_json(nlohmann::json::parse(game_to_json(g).dump())).params;
  CHECK(back.A_H == g.A_H);
  CHECK(back.B_H == g.B_H);
  CHECK(back.D_H == g.D_H);
  CHECK(back.a_H == g.a_H);
  CHECK(back.b_H == g.b_H);
  CHECK(back.A_M == g.A_M);
  CHECK(back.B_M == g.B_M);
  CHECK(back.D_M == g.D_M);
  CHECK(back.a_M == g.a_M);
  CHECK(back.b_M == g.b_M);
}

TEST_CASE("asymmetric D is symmetrized with a warning") {
  auto j = game_to_json(bundled("2x2").params);
  j["D_M"][0][1] = 7.0;
  const auto g = game_from_json(j);
  REQUIRE(g.warnings.size() == 1);
  CHECK(g.warnings[0].find("D_M") != std::string::npos);
  CHECK(g.params.D_M(0, 1) == doctest::Approx((7.0 + 6.43) / 2));
  CHECK(g.params.D_M(1, 0) == g.params.D_M(0, 1));
}

TEST_CASE("malformed files are rejected") {
  auto j = game_to_json(bundled("2x2").params);
  SUBCASE("missing key") {
    j.erase("b_H");
    CHECK_THROWS_AS(game_from_json(j), GameFormatError);
  }
  SUBCASE("ragged matrix") {
    j["A_H"] = nlohmann::json::parse("[[1, 0], [0]]");
    CHECK_THROWS_AS(game_from_json(j), GameFormatError);
  }
  SUBCASE("wrong shape") {
    j["B_M"] = nlohmann::json::parse("[[1, 0, 0], [0, 1, 0]]");
    CHECK_THROWS_AS(game_from_json(j), DimensionError);
  }
  SUBCASE("declared dimension disagrees") {
    j["d_H"] = 3;
    CHECK_THROWS_AS(game_from_json(j), DimensionError);
  }
  SUBCASE("not json") {
    const auto path = std::filesystem::temp_directory_path() / "coadapt_bad_game.json";
    std::ofstream(path) << "{ nope";
    CHECK_THROWS_AS(load_game(path), GameFormatError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("save and load") {
  const auto path = std::filesystem::temp_directory_path() / "coadapt_saved_game.json";
  save_game(path, bundled("2x1").params, "copy");
  const auto g = load_game(path);
  CHECK(g.name == "copy");
  CHECK(g.params.D_M == bundled("2x1").params.D_M);
  std::filesystem::remove(path);
}
