#include "coadapt/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace coadapt {

using nlohmann::json;

GameVersion parse_game_version(std::string_view name) {
  if (name == "1x2") return GameVersion::k1x2;
  if (name == "2x1") return GameVersion::k2x1;
  if (name == "2x2") return GameVersion::k2x2;
  throw std::invalid_argument("unknown game version '" + std::string(name) +
                              "' (expected 1x2, 2x1 or 2x2)");
}

DisplayMode parse_display_mode(std::string_view name) {
  if (name == "cost_circle") return DisplayMode::kCostCircle;
  if (name == "heatmap") return DisplayMode::kHeatmap;
  throw std::invalid_argument("unknown display mode '" + std::string(name) +
                              "' (expected cost_circle or heatmap)");
}

std::string to_string(GameVersion v) {
  switch (v) {
    case GameVersion::k1x2: return "1x2";
    case GameVersion::k2x1: return "2x1";
    case GameVersion::k2x2: return "2x2";
  }
  return "?";
}

std::string to_string(DisplayMode m) {
  return m == DisplayMode::kCostCircle ? "cost_circle" : "heatmap";
}

int human_dim(GameVersion v) { return v == GameVersion::k1x2 ? 1 : 2; }
int ai_dim(GameVersion v) { return v == GameVersion::k2x1 ? 1 : 2; }

int sample_rate_hz(DisplayMode mode) {
  return mode == DisplayMode::kCostCircle ? kCostCircleHz : kHeatmapHz;
}

int TrialConfig::sample_count() const {
  return static_cast<int>(std::lround(duration_s * sample_hz));
}

std::vector<SignVector> symmetry_variants(int d) {
  if (d < 1 || d > 16) throw std::invalid_argument("symmetry dimension out of range");
  std::vector<SignVector> out;
  for (unsigned bits = 0; bits < (1u << d); ++bits) {
    SignVector s(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) s[static_cast<std::size_t>(i)] = (bits >> i) & 1u ? -1 : 1;
    out.push_back(std::move(s));
  }
  return out;
}

SessionPlan build_session(GameVersion version, DisplayMode mode,
                          std::uint64_t seed, std::string participant_key,
                          const GameParams& game, bool research_mode) {
  if (mode == DisplayMode::kHeatmap && version != GameVersion::k2x2 &&
      !research_mode) {
    throw std::invalid_argument("the heat-map display is defined for 2x2 only");
  }
  check_dimensions(game);
  if (game.d_H() != human_dim(version) || game.d_M() != ai_dim(version)) {
    throw DimensionError("game dimensions do not match version " + to_string(version));
  }

  SessionPlan plan;
  plan.game_version = version;
  plan.display_mode = mode;
  plan.participant_key = std::move(participant_key);
  plan.seed = seed;

  const Vector m_nash = solve_nash(game).m;
  for (double alpha : kExperimentRates) {
    for (auto& s : symmetry_variants(human_dim(version))) {
      TrialConfig t;
      t.alpha = alpha;
      t.symmetry = std::move(s);
      t.sample_hz = sample_rate_hz(mode);
      t.m0 = alpha == 0.0 ? m_nash : Vector::Constant(game.d_M(), 0.1);
      plan.trials.push_back(std::move(t));
    }
  }

  // Fisher-Yates with an explicit index draw so plans are reproducible from
  // the seed alone.
  std::mt19937_64 rng(seed);
  for (std::size_t i = plan.trials.size(); i > 1; --i) {
    const std::uint64_t j = rng() % i;
    std::swap(plan.trials[i - 1], plan.trials[j]);
  }
  return plan;
}

namespace {

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from(const json& j, const char* what) {
  if (!j.is_array()) throw RecordFormatError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw RecordFormatError(std::string(what) + " must contain numbers");
    }
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

SignVector signs_from(const json& j) {
  if (!j.is_array()) throw RecordFormatError("symmetry must be an array");
  SignVector s;
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw RecordFormatError("symmetry entries must be +1 or -1");
    s.push_back(e.get<int>());
  }
  return s;
}

}  // namespace

json session_to_json(const SessionPlan& plan) {
  json j;
  j["game_version"] = to_string(plan.game_version);
  j["display_mode"] = to_string(plan.display_mode);
  j["participant_key"] = plan.participant_key;
  j["seed"] = plan.seed;
  json trials = json::array();
  for (const auto& t : plan.trials) {
    trials.push_back({{"alpha", t.alpha},
                      {"symmetry", t.symmetry},
                      {"duration_s", t.duration_s},
                      {"sample_hz", t.sample_hz},
                      {"m0", vec_json(t.m0)}});
  }
  j["trials"] = std::move(trials);
  return j;
}

SessionPlan session_from_json(const json& j) {
  SessionPlan plan;
  plan.game_version = parse_game_version(j.at("game_version").get<std::string>());
  plan.display_mode = parse_display_mode(j.at("display_mode").get<std::string>());
  plan.participant_key = j.at("participant_key").get<std::string>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trials")) {
    TrialConfig c;
    c.alpha = t.at("alpha").get<double>();
    c.symmetry = signs_from(t.at("symmetry"));
    c.duration_s = t.at("duration_s").get<double>();
    c.sample_hz = t.at("sample_hz").get<int>();
    c.m0 = vec_from(t.at("m0"), "m0");
    plan.trials.push_back(std::move(c));
  }
  return plan;
}

Vector apply_mirror(const SignVector& signs, const Vector& h_raw) {
  if (static_cast<Eigen::Index>(signs.size()) != h_raw.size()) {
    throw DimensionError("symmetry and action lengths differ");
  }
  Vector h(h_raw.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const int s = signs[static_cast<std::size_t>(i)];
    if (s != 1 && s != -1) throw std::invalid_argument("mirror signs must be +1 or -1");
    h[i] = s * h_raw[i];
  }
  return h;
}

Eigen::Vector2d cursor_to_action(double px, double py, double viewport_w,
                                 double viewport_h) {
  if (!(viewport_w > 0.0) || !(viewport_h > 0.0)) {
    throw std::invalid_argument("viewport dimensions must be positive");
  }
  const double x = 2.0 * px / viewport_w - 1.0;
  const double y = 1.0 - 2.0 * py / viewport_h;
  return {std::clamp(x, -1.0, 1.0), std::clamp(y, -1.0, 1.0)};
}

Vector cursor_to_human_action(double px, double py, double viewport_w,
                              double viewport_h, int d_H) {
  const auto a = cursor_to_action(px, py, viewport_w, viewport_h);
  if (d_H == 1) return Vector::Constant(1, a.x());
  if (d_H == 2) return a;
  throw DimensionError("cursor input drives at most two human dimensions");
}

Eigen::Vector2d action_to_cursor(const Eigen::Vector2d& action,
                                 double viewport_w, double viewport_h) {
  return {(action.x() + 1.0) * 0.5 * viewport_w,
          (1.0 - action.y()) * 0.5 * viewport_h};
}

std::array<HeatmapCell, kHeatmapSide * kHeatmapSide> heatmap_grid(
    const GameParams& p, const Vector& h, const Vector& m) {
  check_dimensions(p, {h, m});
  if (p.d_H() != 2) throw DimensionError("heat-map grid needs a 2-D human action");
  std::array<HeatmapCell, kHeatmapSide * kHeatmapSide> grid;
  for (int r = 0; r < kHeatmapSide; ++r) {
    for (int c = 0; c < kHeatmapSide; ++c) {
      auto& cell = grid[static_cast<std::size_t>(r * kHeatmapSide + c)];
      cell.offset = {kHeatmapOffsets[static_cast<std::size_t>(c)],
                     kHeatmapOffsets[static_cast<std::size_t>(r)]};
      cell.cost = cost_H(p, {h + cell.offset, m});
    }
  }
  return grid;
}

double circle_radius(double cost, double scale, double r_min, double r_max) {
  return std::clamp(r_min + scale * std::max(cost, 0.0), r_min, r_max);
}

double cost_to_shade(double cost, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("shade bounds need hi > lo");
  return 1.0 - std::clamp((cost - lo) / (hi - lo), 0.0, 1.0);
}

DisplayScale compute_display_scale(const GameParams& p, double r_min,
                                   double r_max) {
  check_dimensions(p);
  if (!(r_max > r_min)) throw std::invalid_argument("need r_max > r_min");
  const int dh = p.d_H();
  const int n = dh + p.d_M();
  if (n > 12) throw DimensionError("display scaling is meant for the small experiment games");

  int per_axis = static_cast<int>(std::floor(std::pow(2.0e5, 1.0 / n)));
  per_axis = std::clamp(per_axis, 2, 41);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto visit = [&](const Vector& z) {
    const double c = cost_H(p, {z.head(dh), z.tail(p.d_M())});
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  };

  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  Vector z(n);
  for (;;) {
    for (int i = 0; i < n; ++i) {
      z[i] = -1.0 + 2.0 * idx[static_cast<std::size_t>(i)] / (per_axis - 1);
    }
    visit(z);
    int k = 0;
    while (k < n && ++idx[static_cast<std::size_t>(k)] == per_axis) {
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == n) break;
  }

  // Stationary point of c_H jointly in (h, m), if it exists, clipped.
  Matrix hess(n, n);
  hess << p.A_H, p.B_H, p.B_H.transpose(), p.D_H;
  Vector g(n);
  g << p.a_H, p.b_H;
  Eigen::FullPivLU<Matrix> lu(hess);
  if (lu.isInvertible()) {
    visit(lu.solve(-g).cwiseMax(-1.0).cwiseMin(1.0));
  }

  DisplayScale s;
  s.cost_lo = lo;
  s.cost_hi = hi > lo ? hi : lo + 1.0;
  s.r_min = r_min;
  s.r_max = r_max;
  s.radius_scale = (r_max - r_min) / (s.cost_hi - s.cost_lo);
  return s;
}

void validate_record(const TrialRecord& rec) {
  auto fail = [](const std::string& msg) { throw RecordFormatError(msg); };
  if (rec.participant_key.empty()) fail("participant_key is required");
  if (rec.trial_index < 0) fail("trial_index must be >= 0");
  if (!std::isfinite(rec.alpha) || rec.alpha < 0.0) fail("alpha must be >= 0");
  if (rec.symmetry.empty() || rec.symmetry.size() > 2) fail("symmetry must have 1 or 2 entries");
  for (int s : rec.symmetry) {
    if (s != 1 && s != -1) fail("symmetry entries must be +1 or -1");
  }
  const auto dh = static_cast<Eigen::Index>(rec.symmetry.size());
  Eigen::Index dm = -1;
  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const auto& s = rec.samples[i];
    const std::string where = "sample " + std::to_string(i) + ": ";
    if (!std::isfinite(s.t)) fail(where + "t must be finite");
    if (!(s.t > last_t)) fail(where + "t must be strictly increasing");
    last_t = s.t;
    if (s.h.size() != dh) fail(where + "h length must match symmetry");
    if (dm < 0) dm = s.m.size();
    if (s.m.size() != dm || dm < 1 || dm > 2) fail(where + "m must have a consistent length of 1 or 2");
    if (!s.h.allFinite() || !s.m.allFinite() || !std::isfinite(s.cost_H) ||
        !std::isfinite(s.cost_M)) {
      fail(where + "values must be finite");
    }
  }
}

json record_to_json(const TrialRecord& rec) {
  json j;
  j["participant_key"] = rec.participant_key;
  j["session_id"] = rec.session_id;
  j["trial_index"] = rec.trial_index;
  j["alpha"] = rec.alpha;
  j["symmetry"] = rec.symmetry;
  json samples = json::array();
  for (const auto& s : rec.samples) {
    samples.push_back({{"t", s.t},
                       {"h", vec_json(s.h)},
                       {"m", vec_json(s.m)},
                       {"cost_H", s.cost_H},
                       {"cost_M", s.cost_M}});
  }
  j["samples"] = std::move(samples);
  return j;
}

TrialRecord record_from_json(const json& j) {
  if (!j.is_object()) throw RecordFormatError("trial record must be a JSON object");
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw RecordFormatError(std::string("missing field ") + key);
    return j.at(key);
  };
  auto number = [](const json& v, const char* what) {
    if (!v.is_number()) throw RecordFormatError(std::string(what) + " must be a number");
    return v.get<double>();
  };

  TrialRecord rec;
  const auto& key = require("participant_key");
  if (!key.is_string()) throw RecordFormatError("participant_key must be a string");
  rec.participant_key = key.get<std::string>();
  if (j.contains("session_id")) {
    if (!j.at("session_id").is_string()) throw RecordFormatError("session_id must be a string");
    rec.session_id = j.at("session_id").get<std::string>();
  }
  const auto& idx = require("trial_index");
  if (!idx.is_number_integer()) throw RecordFormatError("trial_index must be an integer");
  rec.trial_index = idx.get<int>();
  rec.alpha = number(require("alpha"), "alpha");
  rec.symmetry = signs_from(require("symmetry"));

  const auto& samples = require("samples");
  if (!samples.is_array()) throw RecordFormatError("samples must be an array");
  rec.samples.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.is_object()) throw RecordFormatError("each sample must be an object");
    for (const char* f : {"t", "h", "m", "cost_H", "cost_M"}) {
      if (!s.contains(f)) throw RecordFormatError(std::string("sample missing field ") + f);
    }
    TrialSample ts;
    ts.t = number(s.at("t"), "t");
    ts.h = vec_from(s.at("h"), "h");
    ts.m = vec_from(s.at("m"), "m");
    ts.cost_H = number(s.at("cost_H"), "cost_H");
    ts.cost_M = number(s.at("cost_M"), "cost_M");
    rec.samples.push_back(std::move(ts));
  }
  validate_record(rec);
  return rec;
}

TrialRecord run_trial(const AiRule& rule, const TrialConfig& cfg,
                      const std::vector<Vector>& raw_inputs,
                      std::string participant_key, int trial_index,
                      std::string session_id) {
  if (raw_inputs.empty()) throw std::invalid_argument("run_trial needs at least one input");
  if (cfg.sample_hz <= 0) throw std::invalid_argument("sample rate must be positive");
  const auto& p = rule.game();
  if (cfg.m0.size() != p.d_M()) throw DimensionError("m0 has the wrong length");

  TrialRecord rec;
  rec.participant_key = std::move(participant_key);
  rec.session_id = std::move(session_id);
  rec.trial_index = trial_index;
  rec.alpha = cfg.alpha;
  rec.symmetry = cfg.symmetry;

  const int n = cfg.sample_count();
  rec.samples.reserve(static_cast<std::size_t>(n));
  Vector m = cfg.m0;
  for (int k = 0; k < n; ++k) {
    const auto& raw = raw_inputs[std::min<std::size_t>(static_cast<std::size_t>(k),
                                                       raw_inputs.size() - 1)];
    const Vector h = apply_mirror(cfg.symmetry, raw);
    const JointAction x{h, m};
    rec.samples.push_back({static_cast<double>(k) / cfg.sample_hz, raw, m,
                           cost_H(p, x), cost_M(p, x)});
    m = rule.step(h, m, cfg.alpha);
  }
  return rec;
}

}  // namespace coadapt
