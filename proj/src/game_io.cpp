#include "coadapt/game_io.hpp"

#include <fstream>

namespace coadapt {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw GameFormatError("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw GameFormatError("expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw GameFormatError("expected a non-empty array of rows");
  }
  const auto rows = j.size();
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw GameFormatError("matrix rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw GameFormatError("matrix rows must all have the same length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw GameFormatError("matrix entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return m;
}

LoadedGame game_from_json(const json& j) {
  if (!j.is_object()) throw GameFormatError("game file must be a JSON object");
  LoadedGame out;
  out.name = j.value("name", "");

  auto mat = [&](const char* key) {
    if (!j.contains(key)) throw GameFormatError(std::string("missing key ") + key);
    try {
      return matrix_from_json(j.at(key));
    } catch (const GameFormatError& e) {
      throw GameFormatError(std::string(key) + ": " + e.what());
    }
  };
  auto vec = [&](const char* key) {
    if (!j.contains(key)) throw GameFormatError(std::string("missing key ") + key);
    try {
      return vector_from_json(j.at(key));
    } catch (const GameFormatError& e) {
      throw GameFormatError(std::string(key) + ": " + e.what());
    }
  };

  GameParams& p = out.params;
  p.A_H = mat("A_H");
  p.B_H = mat("B_H");
  p.D_H = mat("D_H");
  p.a_H = vec("a_H");
  p.b_H = vec("b_H");
  p.A_M = mat("A_M");
  p.B_M = mat("B_M");
  p.D_M = mat("D_M");
  p.a_M = vec("a_M");
  p.b_M = vec("b_M");

  if (j.contains("d_H") && j.at("d_H").get<int>() != p.d_H()) {
    throw DimensionError("d_H does not match A_H");
  }
  if (j.contains("d_M") && j.at("d_M").get<int>() != p.d_M()) {
    throw DimensionError("d_M does not match A_M");
  }
  check_dimensions(p);

  for (const auto& name : symmetrize(p)) {
    out.warnings.push_back(name + " was not symmetric; replaced by (X + X^T)/2");
  }
  return out;
}

json game_to_json(const GameParams& p, const std::string& name) {
  check_dimensions(p);
  json j;
  if (!name.empty()) j["name"] = name;
  j["d_H"] = p.d_H();
  j["d_M"] = p.d_M();
  j["A_H"] = matrix_to_json(p.A_H);
  j["B_H"] = matrix_to_json(p.B_H);
  j["D_H"] = matrix_to_json(p.D_H);
  j["a_H"] = vector_to_json(p.a_H);
  j["b_H"] = vector_to_json(p.b_H);
  j["A_M"] = matrix_to_json(p.A_M);
  j["B_M"] = matrix_to_json(p.B_M);
  j["D_M"] = matrix_to_json(p.D_M);
  j["a_M"] = vector_to_json(p.a_M);
  j["b_M"] = vector_to_json(p.b_M);
  return j;
}

LoadedGame load_game(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GameFormatError("cannot open game file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw GameFormatError(path.string() + ": " + e.what());
  }
  auto game = game_from_json(j);
  if (game.name.empty()) game.name = path.stem().string();
  return game;
}

void save_game(const std::filesystem::path& path, const GameParams& p,
               const std::string& name) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << game_to_json(p, name).dump(2) << "\n";
}

}  // namespace coadapt
