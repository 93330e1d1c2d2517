#pragma once

// Game parameter files.
//
// JSON object with keys "d_H", "d_M" and one entry per parameter named
// exactly as the symbol (A_H, B_H, D_H, a_H, b_H, A_M, B_M, D_M, a_M, b_M).
// Matrices are row-major nested arrays, vectors are flat arrays. An optional
// "name" string labels the game.

#include "coadapt/game.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace coadapt {

struct LoadedGame {
  std::string name;
  GameParams params;
  // Non-fatal issues found while loading (e.g. symmetrized matrices).
  std::vector<std::string> warnings;
};

class GameFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LoadedGame game_from_json(const nlohmann::json& j);
nlohmann::json game_to_json(const GameParams& p, const std::string& name = "");

LoadedGame load_game(const std::filesystem::path& path);
void save_game(const std::filesystem::path& path, const GameParams& p,
               const std::string& name = "");

nlohmann::json vector_to_json(const Vector& v);
nlohmann::json matrix_to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace coadapt
