#include "coadapt/game.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <sstream>

namespace coadapt {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                  const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << name << " must be " << rows << "x" << cols << ", got " << shape(m);
    throw DimensionError(os.str());
  }
}

void expect_size(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n) {
    std::ostringstream os;
    os << name << " must have length " << n << ", got " << v.size();
    throw DimensionError(os.str());
  }
}

bool is_symmetric(const Matrix& m, double tol) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <=
         tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// A_M is required positive definite, so an LLT that fails signals a broken
// game rather than a near-singular one.
Eigen::LLT<Matrix> factor_a_m(const GameParams& p) {
  Eigen::LLT<Matrix> llt(p.A_M);
  if (llt.info() != Eigen::Success) {
    throw SolverError(
        "A_M is not positive definite; the AI best response is undefined");
  }
  return llt;
}

}  // namespace

GameParams GameParams::zeros(int d_H, int d_M) {
  if (d_H < 1 || d_M < 1) {
    throw DimensionError("action dimensions must be positive");
  }
  GameParams p;
  p.A_H = Matrix::Zero(d_H, d_H);
  p.B_H = Matrix::Zero(d_H, d_M);
  p.D_H = Matrix::Zero(d_M, d_M);
  p.a_H = Vector::Zero(d_H);
  p.b_H = Vector::Zero(d_M);
  p.A_M = Matrix::Zero(d_M, d_M);
  p.B_M = Matrix::Zero(d_M, d_H);
  p.D_M = Matrix::Zero(d_H, d_H);
  p.a_M = Vector::Zero(d_M);
  p.b_M = Vector::Zero(d_H);
  return p;
}

void check_dimensions(const GameParams& p) {
  const auto dh = p.A_H.rows();
  const auto dm = p.A_M.rows();
  if (dh < 1 || dm < 1) throw DimensionError("A_H and A_M must be non-empty");
  expect_shape(p.A_H, dh, dh, "A_H");
  expect_shape(p.B_H, dh, dm, "B_H");
  expect_shape(p.D_H, dm, dm, "D_H");
  expect_size(p.a_H, dh, "a_H");
  expect_size(p.b_H, dm, "b_H");
  expect_shape(p.A_M, dm, dm, "A_M");
  expect_shape(p.B_M, dm, dh, "B_M");
  expect_shape(p.D_M, dh, dh, "D_M");
  expect_size(p.a_M, dm, "a_M");
  expect_size(p.b_M, dh, "b_M");
}

void check_dimensions(const GameParams& p, const JointAction& x) {
  check_dimensions(p);
  expect_size(x.h, p.d_H(), "h");
  expect_size(x.m, p.d_M(), "m");
}

double min_symmetric_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    return -std::numeric_limits<double>::infinity();
  }
  return es.eigenvalues().minCoeff();
}

GameValidation validate(const GameParams& p, const Tolerances& tol) {
  GameValidation v;
  try {
    check_dimensions(p);
    v.dimensions_ok = true;
  } catch (const DimensionError& e) {
    v.messages.emplace_back(e.what());
    return v;
  }

  v.symmetric = is_symmetric(p.A_H, 1e-12) && is_symmetric(p.A_M, 1e-12) &&
                is_symmetric(p.D_H, 1e-12) && is_symmetric(p.D_M, 1e-12);
  if (!v.symmetric) v.messages.emplace_back("A_H, A_M, D_H, D_M must be symmetric");

  v.a_h_positive_definite = min_symmetric_eigenvalue(p.A_H) > tol.eigenvalue;
  if (!v.a_h_positive_definite) v.messages.emplace_back("A_H is not positive definite");
  v.a_m_positive_definite = min_symmetric_eigenvalue(p.A_M) > tol.eigenvalue;
  if (!v.a_m_positive_definite) {
    v.messages.emplace_back("A_M is not positive definite");
    return v;
  }

  const Matrix schur = p.A_H - p.B_H * p.A_M.llt().solve(p.B_M);
  v.schur_positive_definite = min_symmetric_eigenvalue(schur) > tol.eigenvalue;
  if (!v.schur_positive_definite) {
    v.messages.emplace_back("A_H - B_H A_M^-1 B_M is not positive definite");
  }
  v.total_hessian_positive_definite =
      min_symmetric_eigenvalue(total_hessian_H(p)) > tol.eigenvalue;
  if (!v.total_hessian_positive_definite) {
    v.messages.emplace_back("leader total Hessian is not positive definite");
  }
  return v;
}

std::vector<std::string> symmetrize(GameParams& p, double tol) {
  std::vector<std::string> changed;
  auto fix = [&](Matrix& m, const char* name) {
    if (m.rows() != m.cols() || is_symmetric(m, tol)) return;
    m = (0.5 * (m + m.transpose())).eval();
    changed.emplace_back(name);
  };
  fix(p.A_H, "A_H");
  fix(p.D_H, "D_H");
  fix(p.A_M, "A_M");
  fix(p.D_M, "D_M");
  return changed;
}

double cost_H(const GameParams& p, const JointAction& x) {
  check_dimensions(p, x);
  const auto& h = x.h;
  const auto& m = x.m;
  return 0.5 * h.dot(p.A_H * h) + h.dot(p.B_H * m) + 0.5 * m.dot(p.D_H * m) +
         h.dot(p.a_H) + m.dot(p.b_H);
}

double cost_M(const GameParams& p, const JointAction& x) {
  check_dimensions(p, x);
  const auto& h = x.h;
  const auto& m = x.m;
  return 0.5 * m.dot(p.A_M * m) + m.dot(p.B_M * h) + 0.5 * h.dot(p.D_M * h) +
         m.dot(p.a_M) + h.dot(p.b_M);
}

Vector grad_H(const GameParams& p, const JointAction& x) {
  check_dimensions(p, x);
  return p.A_H * x.h + p.B_H * x.m + p.a_H;
}

Vector grad_M(const GameParams& p, const JointAction& x) {
  check_dimensions(p, x);
  return p.A_M * x.m + p.B_M * x.h + p.a_M;
}

Vector best_response_M(const GameParams& p, const Vector& h) {
  check_dimensions(p);
  expect_size(h, p.d_H(), "h");
  return -factor_a_m(p).solve(p.B_M * h + p.a_M);
}

BestResponseMap best_response_map(const GameParams& p) {
  check_dimensions(p);
  const auto llt = factor_a_m(p);
  return {-llt.solve(p.B_M), -llt.solve(p.a_M)};
}

Matrix total_hessian_H(const GameParams& p) {
  const auto br = best_response_map(p);
  const Matrix& J = br.J;
  return p.A_H + p.B_H * J + J.transpose() * p.B_H.transpose() +
         J.transpose() * p.D_H * J;
}

Vector total_grad_H(const GameParams& p, const Vector& h) {
  const auto br = best_response_map(p);
  expect_size(h, p.d_H(), "h");
  const Vector m = br.J * h + br.r0;
  // d/dh c_H(h, Jh + r0) = (A_H h + B_H m + a_H) + J'(B_H' h + D_H m + b_H)
  return p.A_H * h + p.B_H * m + p.a_H +
         br.J.transpose() * (p.B_H.transpose() * h + p.D_H * m + p.b_H);
}

JointAction solve_nash(const GameParams& p) {
  check_dimensions(p);
  const int dh = p.d_H();
  const int dm = p.d_M();
  Matrix k(dh + dm, dh + dm);
  k << p.A_H, p.B_H, p.B_M, p.A_M;
  Vector rhs(dh + dm);
  rhs << -p.a_H, -p.a_M;

  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible()) {
    throw SolverError(
        "Nash block system [[A_H, B_H], [B_M, A_M]] is singular; the game has "
        "no isolated Nash equilibrium");
  }
  const Vector z = lu.solve(rhs);
  return {z.head(dh), z.tail(dm)};
}

JointAction solve_stackelberg_human_led(const GameParams& p) {
  const auto br = best_response_map(p);
  const Matrix& J = br.J;
  const Matrix hess = p.A_H + p.B_H * J + J.transpose() * p.B_H.transpose() +
                      J.transpose() * p.D_H * J;
  const Vector rhs = -(p.a_H + p.B_H * br.r0 + J.transpose() * p.D_H * br.r0 +
                       J.transpose() * p.b_H);

  const Matrix sym = 0.5 * (hess + hess.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success ||
      min_symmetric_eigenvalue(sym) <= Tolerances{}.eigenvalue) {
    throw SolverError(
        "leader total Hessian is singular or indefinite; no isolated "
        "human-led Stackelberg equilibrium");
  }
  const Vector h = llt.solve(rhs);
  return {h, J * h + br.r0};
}

ConditionReport check_differential_nash(const GameParams& p,
                                        const JointAction& x,
                                        const Tolerances& tol) {
  ConditionReport r;
  try {
    check_dimensions(p, x);
  } catch (const DimensionError&) {
    return r;
  }
  r.gradient_norm_H = grad_H(p, x).norm();
  r.gradient_norm_M = grad_M(p, x).norm();
  r.min_eigenvalue_H = min_symmetric_eigenvalue(p.A_H);
  r.min_eigenvalue_M = min_symmetric_eigenvalue(p.A_M);
  r.first_order =
      r.gradient_norm_H <= tol.gradient && r.gradient_norm_M <= tol.gradient;
  r.second_order = r.min_eigenvalue_H > tol.eigenvalue &&
                   r.min_eigenvalue_M > tol.eigenvalue;
  return r;
}

ConditionReport check_differential_stackelberg(const GameParams& p,
                                               const JointAction& x,
                                               const Tolerances& tol) {
  ConditionReport r;
  try {
    check_dimensions(p, x);
  } catch (const DimensionError&) {
    return r;
  }
  r.min_eigenvalue_M = min_symmetric_eigenvalue(p.A_M);
  if (r.min_eigenvalue_M <= tol.eigenvalue) return r;

  r.best_response_residual = (x.m - best_response_M(p, x.h)).norm();
  r.gradient_norm_H = total_grad_H(p, x.h).norm();
  r.gradient_norm_M = grad_M(p, x).norm();
  r.min_eigenvalue_H = min_symmetric_eigenvalue(total_hessian_H(p));
  r.first_order = r.best_response_residual <= tol.gradient &&
                  r.gradient_norm_H <= tol.gradient &&
                  r.gradient_norm_M <= tol.gradient;
  r.second_order = r.min_eigenvalue_H > tol.eigenvalue;
  return r;
}

EquilibriumSet solve_equilibria(const GameParams& p, const Tolerances& tol) {
  EquilibriumSet eq;
  eq.nash = solve_nash(p);
  eq.stackelberg = solve_stackelberg_human_led(p);
  eq.nash_conditions_hold = check_differential_nash(p, eq.nash, tol).holds();
  eq.stackelberg_conditions_hold =
      check_differential_stackelberg(p, eq.stackelberg, tol).holds();
  return eq;
}

namespace {

struct Offsets {
  GameParams params;
  Vector h_se;
  double residual;
};

Offsets fit_offsets(GameParams p, const Vector& h_ne,
                    const std::optional<Vector>& h_se_target,
                    const CalibrationOptions& opt) {
  const auto llt = factor_a_m(p);
  const Vector m_ne = -llt.solve(p.B_M * h_ne);
  p.a_H = -(p.A_H * h_ne + p.B_H * m_ne);
  if (!h_se_target) return {std::move(p), Vector(), 0.0};

  const Matrix J = -llt.solve(p.B_M);
  const Matrix hess = p.A_H + p.B_H * J + J.transpose() * p.B_H.transpose() +
                      J.transpose() * p.D_H * J;
  if (opt.fit_b_h) {
    // With a_M = 0 the leader condition is hess h + a_H + J' b_H = 0.
    const Vector rhs = -(hess * *h_se_target + p.a_H);
    const Matrix jt = J.transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(jt);
    const Vector b = cod.solve(rhs);
    const double before = (jt * p.b_H - rhs).norm();
    const double after = (jt * b - rhs).norm();
    if (after < before) p.b_H = b;
  }

  Vector h_se;
  double residual = std::numeric_limits<double>::infinity();
  try {
    h_se = solve_stackelberg_human_led(p).h;
    residual = (h_se - *h_se_target).norm();
  } catch (const SolverError&) {
  }
  return {std::move(p), std::move(h_se), residual};
}

}  // namespace

CalibrationResult calibrate_offsets(const GameParams& tmpl,
                                    const Vector& h_nash_target,
                                    const std::optional<Vector>& h_se_target,
                                    const CalibrationOptions& options) {
  check_dimensions(tmpl);
  expect_size(h_nash_target, tmpl.d_H(), "h_nash_target");
  if (h_se_target) expect_size(*h_se_target, tmpl.d_H(), "h_stackelberg_target");
  if (!tmpl.a_M.isZero(0.0)) {
    throw std::invalid_argument("calibrate_offsets requires a template with a_M = 0");
  }

  auto best = fit_offsets(tmpl, h_nash_target, h_se_target, options);
  double best_scale = 1.0;

  if (h_se_target && best.residual > options.tolerance && options.scale_search) {
    const double lo = std::log10(options.scale_min);
    const double hi = std::log10(options.scale_max);
    const int n = std::max(2, options.scale_steps);
    for (int i = 0; i < n; ++i) {
      const double s = std::pow(10.0, lo + (hi - lo) * i / (n - 1));
      GameParams scaled = tmpl;
      scaled.B_H *= s;
      auto cand = fit_offsets(std::move(scaled), h_nash_target, h_se_target, options);
      if (cand.residual < best.residual) {
        best = std::move(cand);
        best_scale = s;
      }
    }
  }

  if (h_se_target && !(best.residual <= options.max_residual)) {
    std::ostringstream os;
    os << "calibration failed: best Stackelberg residual " << best.residual
       << " exceeds " << options.max_residual;
    throw CalibrationError(os.str(), best.residual);
  }
  return {std::move(best.params), std::move(best.h_se),
          h_se_target ? best.residual : 0.0, best_scale};
}

GameParams mirror_game(const GameParams& p, const Vector& signs) {
  check_dimensions(p);
  expect_size(signs, p.d_H(), "signs");
  for (Eigen::Index i = 0; i < signs.size(); ++i) {
    if (std::abs(signs[i]) != 1.0) {
      throw std::invalid_argument("mirror signs must be +1 or -1");
    }
  }
  const auto s = signs.asDiagonal();
  GameParams q = p;
  q.A_H = s * p.A_H * s;
  q.B_H = s * p.B_H;
  q.a_H = s * p.a_H;
  q.B_M = p.B_M * s;
  q.D_M = s * p.D_M * s;
  q.b_M = s * p.b_M;
  return q;
}

}  // namespace coadapt
