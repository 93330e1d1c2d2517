#include "coadapt/dynamics.hpp"

#include "coadapt/numfmt.hpp"
#include "coadapt/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace coadapt {

bool is_experiment_rate(double alpha) {
  return std::find(kExperimentRates.begin(), kExperimentRates.end(), alpha) !=
         kExperimentRates.end();
}

AiRule::AiRule(GameParams p, RateMode mode)
    : p_(std::move(p)), mode_(mode), nash_m_(solve_nash(p_).m) {}

void AiRule::check_rate(double alpha) const {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw std::invalid_argument("adaptation rate must be a finite value >= 0");
  }
  switch (mode_) {
    case RateMode::kReplication:
      if (!is_experiment_rate(alpha)) {
        throw std::invalid_argument(
            "adaptation rate must be one of 0, 0.001, 0.01, 0.1, 1");
      }
      break;
    case RateMode::kUnit:
      if (alpha > 1.0) {
        throw std::invalid_argument("adaptation rate must lie in [0, 1]");
      }
      break;
    case RateMode::kGeneral:
      break;
  }
}

Vector AiRule::gradient_step(const Vector& h, const Vector& m,
                             double alpha) const {
  return m - alpha * grad_M(p_, {h, m});
}

Vector AiRule::step(const Vector& h, const Vector& m, double alpha) const {
  check_rate(alpha);
  if (alpha == 0.0) {
    if (m.size() != p_.d_M()) throw DimensionError("m has the wrong length");
    return nash_m_;
  }
  if (alpha == 1.0) {
    if (m.size() != p_.d_M()) throw DimensionError("m has the wrong length");
    return best_response_M(p_, h);
  }
  return gradient_step(h, m, alpha);
}

Vector ai_step(const GameParams& p, const Vector& h, const Vector& m,
               double alpha, RateMode mode) {
  return AiRule(p, mode).step(h, m, alpha);
}

void validate_config(const SimConfig& cfg, const GameParams& p) {
  check_dimensions(p);
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (!std::isfinite(cfg.alpha) || cfg.alpha < 0.0) fail("alpha must be >= 0");
  if (cfg.rate_mode == RateMode::kUnit && cfg.alpha > 1.0) {
    fail("alpha must lie in [0, 1]");
  }
  if (cfg.rate_mode == RateMode::kReplication && !is_experiment_rate(cfg.alpha)) {
    fail("alpha must be one of 0, 0.001, 0.01, 0.1, 1");
  }
  if (!std::isfinite(cfg.eta) || cfg.eta < 0.0) fail("eta must be >= 0");
  if (!std::isfinite(cfg.sigma) || cfg.sigma <= 0.0) fail("sigma must be > 0");
  if (cfg.T < 1) fail("T must be >= 1");
  if (cfg.K < 0) fail("K must be >= 0");
  if (cfg.h0.size() != 0 && cfg.h0.size() != p.d_H()) fail("h0 has the wrong length");
  if (cfg.m0.size() != 0 && cfg.m0.size() != p.d_M()) fail("m0 has the wrong length");
  if (!(cfg.divergence_threshold > 0.0)) fail("divergence threshold must be > 0");
}

namespace {

class Recorder {
 public:
  Recorder(const GameParams& p, EquilibriumSet eq, std::size_t capacity)
      : p_(p) {
    traj_.equilibria = std::move(eq);
    traj_.steps.reserve(capacity);
    traj_.dist_h_ne.reserve(capacity);
    traj_.dist_h_se.reserve(capacity);
    traj_.dist_m_ne.reserve(capacity);
    traj_.dist_m_se.reserve(capacity);
  }

  void record(int t, const Vector& h, const Vector& m) {
    const JointAction x{h, m};
    traj_.steps.push_back({t, h, m, cost_H(p_, x), cost_M(p_, x)});
    const auto& eq = traj_.equilibria;
    traj_.dist_h_ne.push_back((h - eq.nash.h).norm());
    traj_.dist_h_se.push_back((h - eq.stackelberg.h).norm());
    traj_.dist_m_ne.push_back((m - eq.nash.m).norm());
    traj_.dist_m_se.push_back((m - eq.stackelberg.m).norm());
  }

  void mark_diverged(int t) { traj_.diverged_at = t; }
  Trajectory finish() && { return std::move(traj_); }

 private:
  const GameParams& p_;
  Trajectory traj_;
};

bool escaped(const Vector& h, const Vector& m, double threshold) {
  if (!h.allFinite() || !m.allFinite()) return true;
  return h.norm() > threshold || m.norm() > threshold;
}

Vector initial_h(const SimConfig& cfg, const GameParams& p) {
  return cfg.h0.size() ? cfg.h0 : Vector::Zero(p.d_H());
}

Vector initial_m(const SimConfig& cfg, const GameParams& p) {
  return cfg.m0.size() ? cfg.m0 : Vector::Constant(p.d_M(), 0.1);
}

// c_H without the dimension checks; callers guarantee shapes.
double human_cost(const GameParams& p, const Vector& h, const Vector& m) {
  return 0.5 * h.dot(p.A_H * h) + h.dot(p.B_H * m) + 0.5 * m.dot(p.D_H * m) +
         h.dot(p.a_H) + m.dot(p.b_H);
}

}  // namespace

Trajectory simulate_zeroth_order(const GameParams& p, const SimConfig& cfg) {
  validate_config(cfg, p);
  Recorder rec(p, solve_equilibria(p), static_cast<std::size_t>(cfg.T) + 1);

  Vector h = initial_h(cfg, p);
  Vector m = initial_m(cfg, p);
  rec.record(0, h, m);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.sigma);
  const double inv_var = 1.0 / (cfg.sigma * cfg.sigma);
  const int dh = p.d_H();

  Vector delta(dh);
  Vector u;
  Vector v;
  for (int t = 0; t < cfg.T; ++t) {
    for (int i = 0; i < dh; ++i) delta[i] = normal(rng);
    const Vector h_plus = h + delta;
    const Vector h_minus = h - delta;

    // Inner AI steps against the two probe actions, both from m_t.
    const Vector drive_u = p.B_M * h_plus + p.a_M;
    const Vector drive_v = p.B_M * h_minus + p.a_M;
    u = m;
    v = m;
    for (int k = 0; k < cfg.K; ++k) {
      u -= cfg.alpha * (p.A_M * u + drive_u);
      v -= cfg.alpha * (p.A_M * v + drive_v);
    }

    const double g =
        (human_cost(p, h_plus, u) - human_cost(p, h_minus, v)) * inv_var;
    Vector h_next = h - cfg.eta * g * delta;
    Vector m_next = m - cfg.alpha * (p.A_M * m + p.B_M * h + p.a_M);

    if (escaped(h_next, m_next, cfg.divergence_threshold)) {
      rec.mark_diverged(t + 1);
      break;
    }
    h = std::move(h_next);
    m = std::move(m_next);
    rec.record(t + 1, h, m);
  }
  return std::move(rec).finish();
}

Trajectory simulate_simultaneous_gd(const GameParams& p, const SimConfig& cfg) {
  validate_config(cfg, p);
  Recorder rec(p, solve_equilibria(p), static_cast<std::size_t>(cfg.T) + 1);

  Vector h = initial_h(cfg, p);
  Vector m = initial_m(cfg, p);
  rec.record(0, h, m);

  for (int t = 0; t < cfg.T; ++t) {
    Vector h_next = h - cfg.eta * (p.A_H * h + p.B_H * m + p.a_H);
    Vector m_next = m - cfg.alpha * (p.A_M * m + p.B_M * h + p.a_M);
    if (escaped(h_next, m_next, cfg.divergence_threshold)) {
      rec.mark_diverged(t + 1);
      break;
    }
    h = std::move(h_next);
    m = std::move(m_next);
    rec.record(t + 1, h, m);
  }
  return std::move(rec).finish();
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (traj.steps.empty()) throw std::invalid_argument("empty trajectory");
  const auto dh = traj.steps.front().h.size();
  const auto dm = traj.steps.front().m.size();
  out << "t";
  for (Eigen::Index i = 1; i <= dh; ++i) out << ",h_" << i;
  for (Eigen::Index i = 1; i <= dm; ++i) out << ",m_" << i;
  out << ",cost_H,cost_M,dist_h_NE,dist_h_SE,dist_m_NE,dist_m_SE\n";
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    const auto& s = traj.steps[k];
    out << s.t;
    for (Eigen::Index i = 0; i < dh; ++i) out << ',' << format_double17(s.h[i]);
    for (Eigen::Index i = 0; i < dm; ++i) out << ',' << format_double17(s.m[i]);
    out << ',' << format_double17(s.cost_H) << ',' << format_double17(s.cost_M)
        << ',' << format_double17(traj.dist_h_ne[k]) << ','
        << format_double17(traj.dist_h_se[k]) << ','
        << format_double17(traj.dist_m_ne[k]) << ','
        << format_double17(traj.dist_m_se[k]) << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trajectory_csv(out, traj);
}

GradientEstimate estimate_gradient_bias(const GameParams& p, const Vector& h,
                                        const Vector& m, double sigma,
                                        std::size_t n_samples,
                                        std::uint64_t seed) {
  check_dimensions(p, {h, m});
  if (n_samples == 0) throw std::invalid_argument("n_samples must be > 0");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  const double inv_var = 1.0 / (sigma * sigma);
  const int dh = p.d_H();

  // Welford accumulation per coordinate.
  Vector mean = Vector::Zero(dh);
  Vector m2 = Vector::Zero(dh);
  Vector delta(dh);
  for (std::size_t n = 1; n <= n_samples; ++n) {
    for (int i = 0; i < dh; ++i) delta[i] = normal(rng);
    const double g =
        (human_cost(p, h + delta, m) - human_cost(p, h - delta, m)) * inv_var;
    const Vector sample = g * delta;
    const Vector diff = sample - mean;
    mean += diff / static_cast<double>(n);
    m2 += diff.cwiseProduct(sample - mean);
  }
  const double n = static_cast<double>(n_samples);
  Vector se = Vector::Zero(dh);
  if (n_samples > 1) se = (m2 / (n - 1.0) / n).cwiseSqrt();
  return {mean, se};
}

EquilibriumTargets uniform_targets(int d_H, double nash_value,
                                   double stackelberg_value) {
  return {Vector::Constant(d_H, nash_value),
          Vector::Constant(d_H, stackelberg_value)};
}

namespace {

Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = scale * normal(rng);
  }
  return m;
}

Matrix gram(std::mt19937_64& rng, int d) {
  const Matrix g = gaussian(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
  Matrix out = g.transpose() * g;
  return 0.5 * (out + out.transpose());
}

}  // namespace

GameParams random_game(int d_H, int d_M, std::uint64_t seed,
                       const RandomGameOptions& options) {
  if (d_H < 1 || d_M < 1) throw std::invalid_argument("dimensions must be >= 1");
  if (options.targets) {
    if (options.targets->h_nash.size() != d_H ||
        options.targets->h_stackelberg.size() != d_H) {
      throw DimensionError("equilibrium targets must have length d_H");
    }
  }

  double best_gap = 0.0;
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(attempt)};
    std::mt19937_64 rng(seq);

    GameParams p = GameParams::zeros(d_H, d_M);
    p.A_H = Matrix::Identity(d_H, d_H) + options.a_gram_scale * gram(rng, d_H);
    p.A_M = Matrix::Identity(d_M, d_M) + options.a_gram_scale * gram(rng, d_M);
    p.B_H = gaussian(rng, d_H, d_M,
                     options.b_h_scale / std::sqrt(static_cast<double>(d_M)));
    p.B_M = gaussian(rng, d_M, d_H,
                     options.b_m_scale / std::sqrt(static_cast<double>(d_H)));
    p.D_H = options.d_gram_scale * gram(rng, d_M);
    p.D_M = options.d_gram_scale * gram(rng, d_H);

    if (options.targets) {
      try {
        p = calibrate_offsets(p, options.targets->h_nash,
                              options.targets->h_stackelberg)
                .params;
      } catch (const CalibrationError&) {
        continue;
      } catch (const SolverError&) {
        continue;
      }
    } else {
      p.a_H = gaussian(rng, d_H, 1, 0.25).col(0);
      p.b_H = gaussian(rng, d_M, 1, 0.25).col(0);
    }

    if (!validate(p).ok()) continue;
    try {
      const auto eq = solve_equilibria(p);
      if (!eq.nash_conditions_hold || !eq.stackelberg_conditions_hold) continue;
      const double gap = (eq.nash.h - eq.stackelberg.h).norm();
      best_gap = std::max(best_gap, gap);
      if (gap < options.min_separation) continue;
    } catch (const SolverError&) {
      continue;
    }
    return p;
  }
  std::ostringstream os;
  os << "random_game: no valid game after " << options.max_attempts
     << " attempts (largest NE/SE separation " << best_gap << ")";
  throw GenerationError(os.str());
}

std::vector<SweepRun> run_sweep(const GameParams& p, const SimConfig& base,
                                const std::vector<double>& alphas,
                                const std::vector<std::uint64_t>& seeds,
                                unsigned threads) {
  if (alphas.empty()) throw std::invalid_argument("sweep needs at least one alpha");
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");

  std::vector<SweepRun> runs;
  runs.reserve(alphas.size() * seeds.size());
  for (double a : alphas) {
    for (auto s : seeds) runs.push_back({a, s, {}});
  }
  for (const auto& r : runs) {
    SimConfig cfg = base;
    cfg.alpha = r.alpha;
    validate_config(cfg, p);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      SimConfig cfg = base;
      cfg.alpha = runs[i].alpha;
      cfg.seed = runs[i].seed;
      runs[i].trajectory = simulate_zeroth_order(p, cfg);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(
                                      threads, static_cast<unsigned>(runs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  return runs;
}

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRun>& runs) {
  std::vector<double> order;
  std::map<double, std::vector<const SweepRun*>> by_alpha;
  for (const auto& r : runs) {
    if (!by_alpha.contains(r.alpha)) order.push_back(r.alpha);
    by_alpha[r.alpha].push_back(&r);
  }

  std::vector<SweepSummaryRow> rows;
  for (double a : order) {
    SweepSummaryRow row;
    row.alpha = a;
    std::vector<double> hn, hs, mn, ms;
    for (const auto* r : by_alpha[a]) {
      ++row.runs;
      const auto& tr = r->trajectory;
      if (tr.diverged()) {
        ++row.diverged;
        continue;
      }
      hn.push_back(tr.dist_h_ne.back());
      hs.push_back(tr.dist_h_se.back());
      mn.push_back(tr.dist_m_ne.back());
      ms.push_back(tr.dist_m_se.back());
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.median_dist_h_ne = hn.empty() ? nan : median(hn);
    row.median_dist_h_se = hs.empty() ? nan : median(hs);
    row.median_dist_m_ne = mn.empty() ? nan : median(mn);
    row.median_dist_m_se = ms.empty() ? nan : median(ms);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_summary_csv(std::ostream& out,
                             const std::vector<SweepSummaryRow>& rows) {
  out << "alpha,runs,diverged,median_dist_h_NE,median_dist_h_SE,"
         "median_dist_m_NE,median_dist_m_SE\n";
  for (const auto& r : rows) {
    out << format_double(r.alpha) << ',' << r.runs << ',' << r.diverged << ','
        << format_double17(r.median_dist_h_ne) << ','
        << format_double17(r.median_dist_h_se) << ','
        << format_double17(r.median_dist_m_ne) << ','
        << format_double17(r.median_dist_m_se) << '\n';
  }
}

std::string sweep_file_name(const std::string& game, double alpha,
                            std::uint64_t seed) {
  return game + "_" + format_fixed(alpha) + "_" + std::to_string(seed) + ".csv";
}

}  // namespace coadapt
