#pragma once

// Two-player quadratic general-sum game between a human (leader) and an
// adapting AI (follower).
//
//   c_H(h, m) = 1/2 h'A_H h + h'B_H m + 1/2 m'D_H m + h'a_H + m'b_H
//   c_M(h, m) = 1/2 m'A_M m + m'B_M h + 1/2 h'D_M h + m'a_M + h'b_M
//
// with h in R^{d_H} and m in R^{d_M}. All functions here are pure.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coadapt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when the game or an action has inconsistent dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a closed-form solve hits a singular or indefinite system.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

struct GameParams {
  // Human cost.
  Matrix A_H;  // d_H x d_H
  Matrix B_H;  // d_H x d_M
  Matrix D_H;  // d_M x d_M
  Vector a_H;  // d_H
  Vector b_H;  // d_M
  // AI cost.
  Matrix A_M;  // d_M x d_M
  Matrix B_M;  // d_M x d_H
  Matrix D_M;  // d_H x d_H
  Vector a_M;  // d_M
  Vector b_M;  // d_H

  int d_H() const { return static_cast<int>(A_H.rows()); }
  int d_M() const { return static_cast<int>(A_M.rows()); }

  /// Zero-initialized game of the given dimensions.
  static GameParams zeros(int d_H, int d_M);
};

struct JointAction {
  Vector h;
  Vector m;
};

/// Numerical thresholds used by the condition checks.
struct Tolerances {
  double gradient = 1e-8;
  double eigenvalue = 1e-10;
};

struct GameValidation {
  bool dimensions_ok = false;
  bool symmetric = false;
  bool a_h_positive_definite = false;
  bool a_m_positive_definite = false;
  // A_H - B_H A_M^-1 B_M, the leader existence condition as usually stated.
  bool schur_positive_definite = false;
  // Full Hessian of h -> c_H(h, BR_M(h)).
  bool total_hessian_positive_definite = false;
  std::vector<std::string> messages;

  bool ok() const {
    return dimensions_ok && symmetric && a_h_positive_definite &&
           a_m_positive_definite && schur_positive_definite &&
           total_hessian_positive_definite;
  }
};

/// Throws DimensionError if any block has the wrong shape.
void check_dimensions(const GameParams& p);
void check_dimensions(const GameParams& p, const JointAction& x);

GameValidation validate(const GameParams& p, const Tolerances& tol = {});

/// Replaces the four quadratic-form matrices by their symmetric parts.
/// Returns the names of the matrices that were changed.
std::vector<std::string> symmetrize(GameParams& p, double tol = 1e-12);

double cost_H(const GameParams& p, const JointAction& x);
double cost_M(const GameParams& p, const JointAction& x);

Vector grad_H(const GameParams& p, const JointAction& x);
Vector grad_M(const GameParams& p, const JointAction& x);

/// m = -A_M^-1 (B_M h + a_M).
Vector best_response_M(const GameParams& p, const Vector& h);

/// Sensitivity of the follower best response, BR_M(h) = J h + r0.
struct BestResponseMap {
  Matrix J;   // -A_M^-1 B_M
  Vector r0;  // -A_M^-1 a_M
};
BestResponseMap best_response_map(const GameParams& p);

/// Hessian of h -> c_H(h, BR_M(h)).
Matrix total_hessian_H(const GameParams& p);
/// Gradient of h -> c_H(h, BR_M(h)).
Vector total_grad_H(const GameParams& p, const Vector& h);

JointAction solve_nash(const GameParams& p);
JointAction solve_stackelberg_human_led(const GameParams& p);

struct ConditionReport {
  bool first_order = false;
  bool second_order = false;
  double gradient_norm_H = 0.0;  // partial (Nash) or total (Stackelberg)
  double gradient_norm_M = 0.0;
  double min_eigenvalue_H = 0.0;
  double min_eigenvalue_M = 0.0;
  double best_response_residual = 0.0;  // Stackelberg only

  bool holds() const { return first_order && second_order; }
  explicit operator bool() const { return holds(); }
};

ConditionReport check_differential_nash(const GameParams& p,
                                        const JointAction& x,
                                        const Tolerances& tol = {});
ConditionReport check_differential_stackelberg(const GameParams& p,
                                               const JointAction& x,
                                               const Tolerances& tol = {});

struct EquilibriumSet {
  JointAction nash;
  JointAction stackelberg;
  bool nash_conditions_hold = false;
  bool stackelberg_conditions_hold = false;
};

EquilibriumSet solve_equilibria(const GameParams& p,
                                const Tolerances& tol = {});

struct CalibrationOptions {
  // Fit b_H by minimum-norm least squares to move the leader equilibrium.
  bool fit_b_h = true;
  // Fallback: scale B_H over a log grid and keep the best SE residual.
  bool scale_search = true;
  double scale_min = 1e-2;
  double scale_max = 1e2;
  int scale_steps = 161;
  // Residuals at or below this are accepted without searching.
  double tolerance = 1e-9;
  // Best residual above this raises CalibrationError.
  double max_residual = 0.05;
};

struct CalibrationResult {
  GameParams params;
  Vector h_stackelberg;
  double se_residual = 0.0;  // |h_SE - target|, 0 when no target given
  double b_h_scale = 1.0;
};

/// Chooses a_H (and optionally b_H, B_H scale) so that solve_nash returns
/// exactly `h_nash_target` and the leader equilibrium lands near
/// `h_stackelberg_target`. The template must have a_M = 0.
CalibrationResult calibrate_offsets(
    const GameParams& tmpl, const Vector& h_nash_target,
    const std::optional<Vector>& h_stackelberg_target = std::nullopt,
    const CalibrationOptions& options = {});

/// Applies the axis mirror h -> S h (S = diag(signs)) to the game so that
/// equilibria map as h* -> S h*, m* -> m*.
GameParams mirror_game(const GameParams& p, const Vector& signs);

/// Smallest eigenvalue of the symmetric part of `m`.
double min_symmetric_eigenvalue(const Matrix& m);

}  // namespace coadapt
