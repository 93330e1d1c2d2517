#pragma once

// Learning dynamics: the AI's gradient adaptation rule, the zeroth-order
// human model, and simultaneous gradient play.

#include "coadapt/game.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace coadapt {

/// The five adaptation rates used in the human experiments.
inline constexpr std::array<double, 5> kExperimentRates = {0.0, 0.001, 0.01,
                                                           0.1, 1.0};

enum class RateMode {
  kReplication,  // alpha must be one of kExperimentRates
  kUnit,         // alpha in [0, 1]
  kGeneral,      // alpha >= 0
};

bool is_experiment_rate(double alpha);

/// The AI's piecewise update. alpha = 0 holds the Nash action, alpha = 1
/// jumps to the best response, anything else takes one gradient step.
class AiRule {
 public:
  explicit AiRule(GameParams p, RateMode mode = RateMode::kUnit);

  Vector step(const Vector& h, const Vector& m, double alpha) const;
  /// Plain gradient step regardless of alpha.
  Vector gradient_step(const Vector& h, const Vector& m, double alpha) const;

  const GameParams& game() const { return p_; }
  const Vector& nash_m() const { return nash_m_; }
  RateMode mode() const { return mode_; }

 private:
  void check_rate(double alpha) const;

  GameParams p_;
  RateMode mode_;
  Vector nash_m_;
};

Vector ai_step(const GameParams& p, const Vector& h, const Vector& m,
               double alpha, RateMode mode = RateMode::kUnit);

struct SimConfig {
  double alpha = 0.01;
  double eta = 0.01;
  double sigma = 0.1;
  int T = 1000;
  int K = 10;
  Vector h0;  // empty: zero vector
  Vector m0;  // empty: 0.1 in every coordinate
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;
  RateMode rate_mode = RateMode::kGeneral;
};

/// Throws std::invalid_argument on an unusable configuration.
void validate_config(const SimConfig& cfg, const GameParams& p);

struct SimState {
  int t = 0;
  Vector h;
  Vector m;
  double cost_H = 0.0;
  double cost_M = 0.0;
};

struct Trajectory {
  std::vector<SimState> steps;
  std::vector<double> dist_h_ne;
  std::vector<double> dist_h_se;
  std::vector<double> dist_m_ne;
  std::vector<double> dist_m_se;
  EquilibriumSet equilibria;
  /// Iteration at which the state left the finite/bounded region.
  std::optional<int> diverged_at;

  bool diverged() const { return diverged_at.has_value(); }
  const SimState& final_state() const { return steps.back(); }
};

Trajectory simulate_zeroth_order(const GameParams& p, const SimConfig& cfg);
Trajectory simulate_simultaneous_gd(const GameParams& p, const SimConfig& cfg);

/// Columns: t, h_1..h_dH, m_1..m_dM, cost_H, cost_M, dist_h_NE, dist_h_SE,
/// dist_m_NE, dist_m_SE.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path,
                          const Trajectory& traj);

struct GradientEstimate {
  Vector mean;
  Vector standard_error;
};

/// Sample mean of the two-point estimate g * delta with the AI frozen at m.
/// For quadratic c_H its expectation is 2 grad_H(h, m).
GradientEstimate estimate_gradient_bias(const GameParams& p, const Vector& h,
                                        const Vector& m, double sigma,
                                        std::size_t n_samples,
                                        std::uint64_t seed);

struct EquilibriumTargets {
  Vector h_nash;
  Vector h_stackelberg;
};

struct RandomGameOptions {
  std::optional<EquilibriumTargets> targets;
  double min_separation = 0.1;  // |h_NE - h_SE|
  int max_attempts = 50;
  double a_gram_scale = 0.1;
  double b_h_scale = 0.02;
  double b_m_scale = 0.5;
  double d_gram_scale = 0.5;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Targets h_NE = nash_value * 1 and h_SE = stackelberg_value * 1.
EquilibriumTargets uniform_targets(int d_H, double nash_value,
                                   double stackelberg_value);

GameParams random_game(int d_H, int d_M, std::uint64_t seed,
                       const RandomGameOptions& options = {});

// Sweeps.

struct SweepRun {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  Trajectory trajectory;
};

struct SweepSummaryRow {
  double alpha = 0.0;
  std::size_t runs = 0;
  std::size_t diverged = 0;
  double median_dist_h_ne = 0.0;
  double median_dist_h_se = 0.0;
  double median_dist_m_ne = 0.0;
  double median_dist_m_se = 0.0;
};

/// Runs simulate_zeroth_order for every (alpha, seed) pair. Each run is
/// independent, so `threads` > 1 spreads them across workers; results are
/// ordered by alpha then seed regardless.
std::vector<SweepRun> run_sweep(const GameParams& p, const SimConfig& base,
                                const std::vector<double>& alphas,
                                const std::vector<std::uint64_t>& seeds,
                                unsigned threads = 1);

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRun>& runs);

void write_sweep_summary_csv(std::ostream& out,
                             const std::vector<SweepSummaryRow>& rows);

/// "{game}_{alpha}_{seed}.csv"
std::string sweep_file_name(const std::string& game, double alpha,
                            std::uint64_t seed);

}  // namespace coadapt
