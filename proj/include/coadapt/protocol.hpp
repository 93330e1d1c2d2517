#pragma once

// Experiment semantics shared by the simulator, the server and the browser
// client: session plans, mirror symmetries, cursor scaling, and the math
// behind both cost displays.

#include "coadapt/dynamics.hpp"
#include "coadapt/game.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coadapt {

enum class GameVersion { k1x2, k2x1, k2x2 };
enum class DisplayMode { kCostCircle, kHeatmap };

/// Throws std::invalid_argument for unknown names.
GameVersion parse_game_version(std::string_view name);
DisplayMode parse_display_mode(std::string_view name);
std::string to_string(GameVersion v);
std::string to_string(DisplayMode m);

int human_dim(GameVersion v);
int ai_dim(GameVersion v);

inline constexpr double kTrialDurationS = 25.0;
inline constexpr int kCostCircleHz = 60;
inline constexpr int kHeatmapHz = 24;

int sample_rate_hz(DisplayMode mode);

using SignVector = std::vector<int>;

struct TrialConfig {
  double alpha = 0.0;
  SignVector symmetry;
  double duration_s = kTrialDurationS;
  int sample_hz = kCostCircleHz;
  Vector m0;

  int sample_count() const;
};

struct SessionPlan {
  GameVersion game_version = GameVersion::k2x2;
  DisplayMode display_mode = DisplayMode::kCostCircle;
  std::string participant_key;
  std::uint64_t seed = 0;
  std::vector<TrialConfig> trials;
};

/// All sign vectors in {-1, +1}^d, identity first.
std::vector<SignVector> symmetry_variants(int d);

/// One trial per (rate, symmetry) pair, shuffled by `seed`. The heat-map
/// display is only defined for 2x2 unless `research_mode` is set. `game`
/// supplies m^NE for the constant-policy trials.
SessionPlan build_session(GameVersion version, DisplayMode mode,
                          std::uint64_t seed, std::string participant_key,
                          const GameParams& game, bool research_mode = false);

nlohmann::json session_to_json(const SessionPlan& plan);
SessionPlan session_from_json(const nlohmann::json& j);

/// Component-wise h_i = s_i * h_raw_i.
Vector apply_mirror(const SignVector& signs, const Vector& h_raw);

/// Screen pixels (y grows downward) to the action square [-1, 1]^2.
Eigen::Vector2d cursor_to_action(double px, double py, double viewport_w,
                                 double viewport_h);

/// Cursor to a d_H-dimensional human action; 1-D games use the horizontal
/// axis only.
Vector cursor_to_human_action(double px, double py, double viewport_w,
                              double viewport_h, int d_H);

/// Inverse of cursor_to_action (without clamping).
Eigen::Vector2d action_to_cursor(const Eigen::Vector2d& action,
                                 double viewport_w, double viewport_h);

inline constexpr int kHeatmapSide = 7;
inline constexpr double kHeatmapSpacing = 0.05;
inline constexpr double kHeatmapHalfWidth = 0.15;
inline constexpr std::array<double, kHeatmapSide> kHeatmapOffsets = {
    -0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15};

struct HeatmapCell {
  Eigen::Vector2d offset;
  double cost = 0.0;
};

/// 7x7 probes of c_H(h + offset, m). Row r, column c holds offset
/// (kHeatmapOffsets[c], kHeatmapOffsets[r]); the center cell is (3, 3).
std::array<HeatmapCell, kHeatmapSide * kHeatmapSide> heatmap_grid(
    const GameParams& p, const Vector& h, const Vector& m);

double circle_radius(double cost, double scale, double r_min, double r_max);
double cost_to_shade(double cost, double lo, double hi);

/// Fixed per-game normalization for the displays.
struct DisplayScale {
  double cost_lo = 0.0;
  double cost_hi = 1.0;
  double r_min = 4.0;
  double r_max = 200.0;
  double radius_scale = 1.0;  // pixels per unit cost
};

/// Range of c_H over the box [-1, 1]^{d_H + d_M}, found by a dense grid
/// plus all box vertices and the clipped unconstrained minimizer.
DisplayScale compute_display_scale(const GameParams& p, double r_min = 4.0,
                                   double r_max = 200.0);

struct TrialSample {
  double t = 0.0;
  Vector h;
  Vector m;
  double cost_H = 0.0;
  double cost_M = 0.0;
};

struct TrialRecord {
  std::string participant_key;
  std::string session_id;
  int trial_index = 0;
  double alpha = 0.0;
  SignVector symmetry;
  std::vector<TrialSample> samples;
};

class RecordFormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws RecordFormatError describing the first violated constraint.
void validate_record(const TrialRecord& rec);

nlohmann::json record_to_json(const TrialRecord& rec);
/// Parses and validates.
TrialRecord record_from_json(const nlohmann::json& j);

/// Replays a trial: at tick k the raw (screen-frame) input is mirrored into
/// the game action h_k = s * raw_k, the sample (t_k = k / rate, raw_k, m_k,
/// costs at (h_k, m_k)) is recorded, then m advances by one AI update
/// against h_k. Samples therefore hold h in the screen frame; unmirror()
/// recovers the game frame. Inputs shorter than the trial hold their last
/// value.
TrialRecord run_trial(const AiRule& rule, const TrialConfig& cfg,
                      const std::vector<Vector>& raw_inputs,
                      std::string participant_key, int trial_index,
                      std::string session_id = "");

}  // namespace coadapt
