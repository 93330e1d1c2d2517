// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes.

#include "coadapt/analysis.hpp"
#include "coadapt/dynamics.hpp"
#include "coadapt/game.hpp"
#include "coadapt/game_io.hpp"
#include "coadapt/numfmt.hpp"
#include "coadapt/server.hpp"
#include "test_util.hpp"

#include <httplib.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

extern char** environ;

using namespace coadapt;
using coadapt::testing::bundled;
using coadapt::testing::vec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// ---- A1 ----

struct Expected {
  const char* version;
  std::vector<double> h_ne, m_ne, h_se, m_se;
};

Outcome a1() {
  const std::vector<Expected> table{
      {"2x2", {-0.25, -0.25}, {0.13, 0.13}, {0.25, 0.25}, {-0.13, -0.13}},
      {"1x2", {-0.25}, {0.15, 0.15}, {0.25}, {-0.15, -0.15}},
      {"2x1", {-0.25, -0.25}, {0.37}, {0.25, 0.25}, {-0.37}},
  };
  std::vector<GameParams> games;
  for (const auto& row : table) games.push_back(bundled(row.version).params);

  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t g = 0; g < table.size(); ++g) {
    const auto ne = solve_nash(games[g]);
    const auto se = solve_stackelberg_human_led(games[g]);
    auto cmp = [&](const Vector& got, const std::vector<double>& want) {
      if (got.size() != static_cast<Eigen::Index>(want.size())) {
        worst = std::numeric_limits<double>::infinity();
        return;
      }
      for (std::size_t i = 0; i < want.size(); ++i) {
        worst = std::max(worst, std::abs(got[static_cast<Eigen::Index>(i)] - want[i]));
      }
    };
    cmp(ne.h, table[g].h_ne);
    cmp(ne.m, table[g].m_ne);
    cmp(se.h, table[g].h_se);
    cmp(se.m, table[g].m_se);
  }
  const double secs = seconds_since(t0);
  return {worst <= 0.02 && secs < 1.0,
          "max coordinate error " + num(worst) + " (limit 0.02), " + num(secs) + " s (limit 1 s)"};
}

// ---- A2 ----

Outcome a2() {
  int ok = 0, total = 0;
  for (const char* v : {"2x2", "1x2", "2x1"}) {
    const auto p = bundled(v).params;
    const auto ne = solve_nash(p);
    const auto se = solve_stackelberg_human_led(p);
    ok += check_differential_nash(p, ne).holds();
    ok += check_differential_stackelberg(p, se).holds();
    auto mutant = p;
    mutant.A_H = -p.A_H;
    ok += !check_differential_nash(mutant, ne).holds();
    ok += !check_differential_stackelberg(mutant, se).holds();
    total += 4;
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " checks as expected (true at solutions, false on negated-A_H mutants)"};
}

// ---- A3 ----

Outcome a3() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 8);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  const double step = 1e-5;
  for (int k = 0; k < 100; ++k) {
    const int dh = dim(rng), dm = dim(rng);
    const auto p = coadapt::testing::dense_random_game(rng, dh, dm);
    JointAction x{Vector(dh), Vector(dm)};
    for (auto& v : x.h) v = n(rng);
    for (auto& v : x.m) v = n(rng);

    const Vector gh = grad_H(p, x);
    const Vector gm = grad_M(p, x);
    Vector fh(dh), fm(dm);
    for (int i = 0; i < dh; ++i) {
      JointAction a = x, b = x;
      a.h[i] += step;
      b.h[i] -= step;
      fh[i] = (cost_H(p, a) - cost_H(p, b)) / (2 * step);
    }
    for (int i = 0; i < dm; ++i) {
      JointAction a = x, b = x;
      a.m[i] += step;
      b.m[i] -= step;
      fm[i] = (cost_M(p, a) - cost_M(p, b)) / (2 * step);
    }
    worst = std::max(worst, (gh - fh).norm() / std::max(gh.norm(), 1.0));
    worst = std::max(worst, (gm - fm).norm() / std::max(gm.norm(), 1.0));
  }
  return {worst <= 1e-6, "max relative error " + num(worst) + " over 100 games (limit 1e-6)"};
}

// ---- A4 ----

Outcome a4() {
  const auto p = bundled("2x2").params;
  const Vector h = Vector::Zero(2);
  const Vector m = vec({0.1, 0.1});
  const auto t0 = Clock::now();
  const auto est = estimate_gradient_bias(p, h, m, 0.1, 100000, 0);
  const double secs = seconds_since(t0);
  const Vector target = 2.0 * grad_H(p, {h, m});
  double worst_z = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    worst_z = std::max(worst_z, std::abs(est.mean[i] - target[i]) / est.standard_error[i]);
  }
  return {worst_z <= 3.0 && secs < 10.0,
          "max |mean - 2 grad_H| = " + num(worst_z) + " SE (limit 3), " + num(secs) +
              " s (limit 10 s)"};
}

// ---- A5 / A6 ----

std::vector<std::uint64_t> seed_range(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome a5() {
  const auto p = bundled("2x2").params;
  SimConfig base;
  base.eta = 0.01;
  base.sigma = 0.1;
  base.T = 10000;
  base.K = 10;
  const std::vector<double> alphas{0.0001, 0.001, 0.01, 0.1};
  const auto t0 = Clock::now();
  const auto rows = summarize_sweep(run_sweep(p, base, alphas, seed_range(20), workers()));
  const double secs = seconds_since(t0);

  bool ok = rows.size() == alphas.size();
  std::string table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table += " a=" + format_fixed(rows[i].alpha) + ":NE " + num(rows[i].median_dist_h_ne) +
             "/SE " + num(rows[i].median_dist_h_se);
    ok = ok && rows[i].diverged == 0;
    if (i > 0) {
      ok = ok && rows[i].median_dist_h_se < rows[i - 1].median_dist_h_se;
      ok = ok && rows[i].median_dist_h_ne > rows[i - 1].median_dist_h_ne;
    }
  }
  if (ok) {
    ok = rows.front().median_dist_h_ne < rows.front().median_dist_h_se &&
         rows.back().median_dist_h_se < rows.back().median_dist_h_ne;
  }
  ok = ok && secs < 60.0;
  return {ok, "median final |h - eq| over 20 seeds," + table + "; " + num(secs) +
                  " s (limit 60 s)"};
}

Outcome a6() {
  const std::vector<double> alphas{0.0001, 0.001, 0.01};
  const auto t0 = Clock::now();
  int ordered = 0;
  std::string failures;
  RandomGameOptions opt;
  opt.targets = uniform_targets(64, -0.25, 0.25);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_game(64, 128, seed, opt);
    SimConfig base;
    base.eta = 0.01;
    base.sigma = 0.1;
    base.T = 1000;
    base.K = 10;
    base.seed = seed;
    const auto runs = run_sweep(p, base, alphas, {seed}, workers());
    std::vector<double> ne, se;
    bool diverged = false;
    for (const auto& r : runs) {
      diverged = diverged || r.trajectory.diverged();
      ne.push_back(r.trajectory.dist_h_ne.back());
      se.push_back(r.trajectory.dist_h_se.back());
    }
    const bool ne_ok = ne[0] < ne[1] && ne[0] < ne[2];
    const bool se_ok = se[2] < se[0] && se[2] < se[1];
    if (!diverged && ne_ok && se_ok) {
      ++ordered;
    } else {
      failures += " " + std::to_string(seed);
    }
  }
  const double secs = seconds_since(t0);
  return {ordered >= 8 && secs < 300.0,
          std::to_string(ordered) + "/10 seeds ordered (limit 8)" +
              (failures.empty() ? "" : "; unordered seeds:" + failures) + "; " + num(secs) +
              " s (limit 300 s)"};
}

// ---- A7 ----

Outcome a7() {
  double worst = 0.0;
  for (const char* v : {"2x2", "1x2", "2x1"}) {
    const auto p = bundled(v).params;
    const auto ne = solve_nash(p);
    for (double a : {0.001, 0.01, 0.1, 1.0}) {
      for (double e : {0.001, 0.01, 0.1, 1.0}) {
        SimConfig cfg;
        cfg.alpha = a;
        cfg.eta = e;
        cfg.T = 1;
        cfg.h0 = ne.h;
        cfg.m0 = ne.m;
        const auto tr = simulate_simultaneous_gd(p, cfg);
        worst = std::max({worst, (tr.steps[1].h - ne.h).norm(), (tr.steps[1].m - ne.m).norm()});
      }
    }
  }
  return {worst <= 1e-12, "max one-step displacement " + num(worst) + " (limit 1e-12)"};
}

// ---- A8 ----

// A child process running `coadapt serve`, with its stdout on a pipe.
class ServeProcess {
 public:
  ServeProcess(const fs::path& data) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&fa, fds[0]);
    posix_spawn_file_actions_addopen(&fa, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    const std::string cli = COADAPT_CLI_PATH;
    const std::string data_s = data.string();
    const std::string games = COADAPT_CONFIG_DIR;
    std::vector<std::string> args{cli, "serve", "--host", "127.0.0.1", "--port", "0",
                                  "--data", data_s, "--games", games};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    const int rc = posix_spawn(&pid_, cli.c_str(), &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    close(fds[1]);
    if (rc != 0) {
      close(fds[0]);
      throw std::runtime_error("cannot spawn " + cli);
    }
    // First stdout line: "listening on http://HOST:PORT".
    std::string line;
    char c;
    while (read(fds[0], &c, 1) == 1 && c != '\n') line += c;
    close(fds[0]);
    const auto colon = line.rfind(':');
    if (line.rfind("listening on", 0) != 0 || colon == std::string::npos) {
      kill_hard();
      throw std::runtime_error("server did not start: '" + line + "'");
    }
    port_ = std::stoi(line.substr(colon + 1));
  }
  ~ServeProcess() { kill_hard(); }

  int port() const { return port_; }

  // SIGKILL: nothing gets a chance to flush after the last acknowledgment.
  void kill_hard() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

 private:
  pid_t pid_ = -1;
  int port_ = 0;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + COADAPT_CLI_PATH + "' " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<TrialRecord> synthetic_trials(const GameParams& g) {
  const std::vector<double> alphas{0.0, 0.001, 0.01, 0.1, 1.0};
  const auto signs = symmetry_variants(2);
  const Vector m_ne = solve_nash(g).m;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<TrialRecord> out;
  for (int i = 0; i < 5; ++i) {
    TrialConfig cfg;
    cfg.alpha = alphas[static_cast<std::size_t>(i)];
    cfg.symmetry = signs[static_cast<std::size_t>(i) % signs.size()];
    cfg.m0 = cfg.alpha == 0.0 ? m_ne : vec({0.1, 0.1});
    std::vector<Vector> raw;
    Vector h = vec({0.0, 0.0});
    for (int k = 0; k < 1500; ++k) {
      h += vec({noise(rng), noise(rng)});
      h = h.cwiseMax(-1.0).cwiseMin(1.0);
      raw.push_back(h);
    }
    out.push_back(run_trial(AiRule(g), cfg, raw, "synthetic-participant", i, "session-1"));
  }
  return out;
}

bool same_stats(const SummaryStats& a, const SummaryStats& b) {
  if (a.per_alpha.size() != b.per_alpha.size()) return false;
  for (std::size_t i = 0; i < a.per_alpha.size(); ++i) {
    const auto& x = a.per_alpha[i];
    const auto& y = b.per_alpha[i];
    if (x.alpha != y.alpha || x.median_h != y.median_h || x.median_m != y.median_m ||
        x.cost_H.q25 != y.cost_H.q25 || x.cost_H.q50 != y.cost_H.q50 ||
        x.cost_H.q75 != y.cost_H.q75 || x.cost_M.q50 != y.cost_M.q50 ||
        x.hist_h != y.hist_h || x.hist_m != y.hist_m || x.samples != y.samples) {
      return false;
    }
  }
  return true;
}

Outcome a8() {
  coadapt::testing::TempDir dir;
  const auto db = dir.path() / "trials.sqlite";
  const auto g = bundled("2x2").params;
  const auto eq = solve_equilibria(g);
  const auto trials = synthetic_trials(g);

  std::vector<std::int64_t> ids;
  {
    ServeProcess server(db);
    httplib::Client c("127.0.0.1", server.port());
    for (const auto& t : trials) {
      const auto r = c.Post("/api/trials", record_to_json(t).dump(), "application/json");
      if (!r || r->status != 200) return {false, "POST failed"};
      ids.push_back(nlohmann::json::parse(r->body)["trial_id"].get<std::int64_t>());
    }
    server.kill_hard();
  }

  bool restart_ok = false;
  {
    ServeProcess server(db);
    httplib::Client c("127.0.0.1", server.port());
    const auto health = c.Get("/api/health");
    const auto again = c.Post("/api/trials", record_to_json(trials[2]).dump(), "application/json");
    restart_ok = health && nlohmann::json::parse(health->body)["trials"] == 5 && again &&
                 again->status == 200 &&
                 nlohmann::json::parse(again->body)["trial_id"].get<std::int64_t>() == ids[2];
  }
  if (!restart_ok) return {false, "store did not survive the restart intact"};

  const auto csv = dir.path() / "export.csv";
  if (run_cli("export --data '" + db.string() + "' --out '" + csv.string() + "'") != 0) {
    return {false, "export command failed"};
  }
  const auto exported = read_export_csv(csv);
  bool trimmed_ok = exported.size() == 5;
  for (const auto& t : exported) {
    trimmed_ok = trimmed_ok && t.samples.size() == 1500 &&
                 trim_last_seconds(t, 5.0).samples.size() == 300;
  }
  const auto from_csv = analyze_trials(exported, eq, 5.0);
  const auto in_memory = analyze_trials(trials, eq, 5.0);
  const bool equal = same_stats(from_csv, in_memory);
  return {restart_ok && trimmed_ok && equal,
          std::string("5 trials posted, server killed and restarted, ") +
              (trimmed_ok ? "300 of 1500 samples kept per trial, " : "trim count wrong, ") +
              (equal ? "summary bit-identical to in-memory" : "summary DIFFERS from in-memory")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"A1 equilibrium reproduction", a1},   {"A2 condition checks", a2},
      {"A3 gradient correctness", a3},       {"A4 zeroth-order estimator", a4},
      {"A5 equilibrium shift (2x2)", a5},    {"A6 large-scale simulation (64x128)", a6},
      {"A7 stationary-point invariance", a7}, {"A8 pipeline round trip", a8},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
