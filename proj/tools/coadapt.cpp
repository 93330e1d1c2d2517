// coadapt: command-line entry point.
//
// Exit codes: 0 success, 2 usage error, 1 runtime failure.

#include "coadapt/analysis.hpp"
#include "coadapt/dynamics.hpp"
#include "coadapt/game.hpp"
#include "coadapt/game_io.hpp"
#include "coadapt/numfmt.hpp"
#include "coadapt/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

namespace fs = std::filesystem;
using namespace coadapt;
using nlohmann::json;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Stderr line a run can be reproduced from.
void echo_config(const std::string& command, json cfg) {
  cfg["command"] = command;
  std::cerr << "effective config: " << cfg.dump() << std::endl;
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (double x : v) a.push_back(x + 0.0);  // no "-0"
  return a;
}

std::string vec_text(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i] + 0.0);
  }
  return s + ")";
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> xs;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    try {
      xs.push_back(parse_double(item));
    } catch (const std::invalid_argument&) {
      throw UsageError(what + ": not a number: '" + item + "'");
    }
  }
  return xs;
}

Vector parse_vector(const std::string& text, int dim, const std::string& what) {
  std::vector<double> xs = parse_list(text, what);
  if (xs.size() == 1 && dim > 1) return Vector::Constant(dim, xs[0]);
  if (static_cast<int>(xs.size()) != dim) {
    throw UsageError(what + ": expected 1 or " + std::to_string(dim) + " values");
  }
  return Eigen::Map<Vector>(xs.data(), dim);
}

RateMode parse_rate_mode(const std::string& s) {
  if (s == "replication") return RateMode::kReplication;
  if (s == "unit") return RateMode::kUnit;
  if (s == "general") return RateMode::kGeneral;
  throw UsageError("unknown rate mode: " + s);
}

void print_report(std::ostream& out, const char* name, const JointAction& x,
                  const ConditionReport& r) {
  out << name << ": h = " << vec_text(x.h) << ", m = " << vec_text(x.m) << '\n'
      << "  first-order " << (r.first_order ? "ok" : "FAILED")
      << " (|grad_H| = " << format_double(r.gradient_norm_H)
      << ", |grad_M| = " << format_double(r.gradient_norm_M) << ")\n"
      << "  second-order " << (r.second_order ? "ok" : "FAILED")
      << " (min eig H = " << format_double(r.min_eigenvalue_H)
      << ", min eig M = " << format_double(r.min_eigenvalue_M) << ")\n";
}

// ---- equilibria ----

struct EquilibriaArgs {
  std::string game;
  bool as_json = false;
};

int run_equilibria(const EquilibriaArgs& a) {
  echo_config("equilibria", {{"game", a.game}, {"json", a.as_json}});
  const auto g = load_game(a.game);
  for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
  const auto& p = g.params;
  const auto v = validate(p);
  for (const auto& msg : v.messages) std::cerr << "warning: " << msg << '\n';

  const auto ne = solve_nash(p);
  const auto ne_rep = check_differential_nash(p, ne);
  std::optional<JointAction> se;
  ConditionReport se_rep;
  std::string se_error;
  try {
    se = solve_stackelberg_human_led(p);
    se_rep = check_differential_stackelberg(p, *se);
  } catch (const SolverError& e) {
    se_error = e.what();
  }

  if (a.as_json) {
    json out{{"game", g.name},
             {"nash", {{"h", vec_json(ne.h)}, {"m", vec_json(ne.m)}, {"conditions", ne_rep.holds()}}}};
    if (se) {
      out["stackelberg"] = {{"h", vec_json(se->h)}, {"m", vec_json(se->m)},
                            {"conditions", se_rep.holds()}};
    } else {
      out["stackelberg"] = {{"error", se_error}};
    }
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << "game " << g.name << " (d_H = " << p.d_H() << ", d_M = " << p.d_M() << ")\n";
    print_report(std::cout, "Nash", ne, ne_rep);
    if (se) {
      print_report(std::cout, "Stackelberg (human leads)", *se, se_rep);
      std::cout << "  best-response residual " << format_double(se_rep.best_response_residual)
                << '\n';
    } else {
      std::cout << "Stackelberg (human leads): " << se_error << '\n';
    }
  }
  return 0;
}

// ---- simulate / sweep ----

struct SimArgs {
  std::string game;
  double alpha = 0.01;
  double eta = 0.01;
  double sigma = 0.1;
  int T = 1000;
  int K = 10;
  std::uint64_t seed = 0;
  std::string h0;
  std::string m0;
  std::string rate_mode = "general";
  std::string method = "zeroth-order";
  double divergence = 1e6;
  std::string out;
};

SimConfig sim_config(const SimArgs& a, const GameParams& p) {
  SimConfig c;
  c.alpha = a.alpha;
  c.eta = a.eta;
  c.sigma = a.sigma;
  c.T = a.T;
  c.K = a.K;
  c.seed = a.seed;
  c.divergence_threshold = a.divergence;
  c.rate_mode = parse_rate_mode(a.rate_mode);
  if (!a.h0.empty()) c.h0 = parse_vector(a.h0, p.d_H(), "--h0");
  if (!a.m0.empty()) c.m0 = parse_vector(a.m0, p.d_M(), "--m0");
  try {
    validate_config(c, p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json sim_json(const SimArgs& a) {
  return {{"game", a.game}, {"alpha", a.alpha}, {"eta", a.eta}, {"sigma", a.sigma},
          {"T", a.T}, {"K", a.K}, {"seed", a.seed}, {"h0", a.h0}, {"m0", a.m0},
          {"rate_mode", a.rate_mode}, {"method", a.method}, {"divergence", a.divergence},
          {"out", a.out}};
}

void report_divergence(const Trajectory& tr) {
  if (tr.diverged()) {
    std::cerr << "warning: diverged at step " << *tr.diverged_at << "; trajectory truncated\n";
  }
}

int run_simulate(const SimArgs& a) {
  echo_config("simulate", sim_json(a));
  const auto g = load_game(a.game);
  const auto cfg = sim_config(a, g.params);
  Trajectory tr;
  if (a.method == "zeroth-order") {
    tr = simulate_zeroth_order(g.params, cfg);
  } else if (a.method == "simultaneous") {
    tr = simulate_simultaneous_gd(g.params, cfg);
  } else {
    throw UsageError("unknown method: " + a.method);
  }
  report_divergence(tr);
  if (a.out.empty() || a.out == "-") {
    write_trajectory_csv(std::cout, tr);
  } else {
    write_trajectory_csv(fs::path(a.out), tr);
    std::cerr << "wrote " << tr.steps.size() << " rows to " << a.out << '\n';
  }
  return tr.diverged() ? 1 : 0;
}

struct SweepArgs {
  SimArgs sim;
  std::string alphas;
  int seeds = 10;
  std::uint64_t first_seed = 0;
  unsigned threads = 0;
  std::string out_dir = "sweep";
};

int run_sweep_cmd(const SweepArgs& a) {
  auto cfg_json = sim_json(a.sim);
  cfg_json.erase("alpha");
  cfg_json.erase("seed");
  cfg_json.erase("out");
  cfg_json.erase("method");
  const auto alphas = parse_list(a.alphas, "--alphas");
  cfg_json["alphas"] = alphas;
  cfg_json["seeds"] = a.seeds;
  cfg_json["first_seed"] = a.first_seed;
  cfg_json["threads"] = a.threads;
  cfg_json["out_dir"] = a.out_dir;
  echo_config("sweep", cfg_json);

  if (alphas.empty()) throw UsageError("--alphas must list at least one rate");
  if (a.seeds < 1) throw UsageError("--seeds must be at least 1");
  const auto g = load_game(a.sim.game);
  const auto base = sim_config(a.sim, g.params);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < a.seeds; ++i) seeds.push_back(a.first_seed + static_cast<std::uint64_t>(i));
  const unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());

  const auto runs = run_sweep(g.params, base, alphas, seeds, threads);

  fs::create_directories(a.out_dir);
  json manifest{{"config", cfg_json}, {"game_name", g.name}, {"runs", json::array()}};
  for (const auto& r : runs) {
    const auto name = sweep_file_name(g.name, r.alpha, r.seed);
    write_trajectory_csv(fs::path(a.out_dir) / name, r.trajectory);
    json entry{{"alpha", r.alpha}, {"seed", r.seed}, {"file", name},
               {"steps", r.trajectory.steps.size()}};
    if (r.trajectory.diverged()) entry["diverged_at"] = *r.trajectory.diverged_at;
    manifest["runs"].push_back(entry);
  }
  const auto rows = summarize_sweep(runs);
  {
    std::ofstream out(fs::path(a.out_dir) / "summary.csv");
    write_sweep_summary_csv(out, rows);
    if (!out) throw std::runtime_error("cannot write summary.csv");
  }
  std::ofstream(fs::path(a.out_dir) / "manifest.json") << manifest.dump(2) << '\n';
  write_sweep_summary_csv(std::cout, rows);
  return 0;
}

// ---- gen-game ----

struct GenArgs {
  int dh = 64;
  int dm = 128;
  std::uint64_t seed = 0;
  std::vector<double> targets;  // {nash, stackelberg}
  double min_separation = 0.1;
  std::string out;
};

int run_gen_game(const GenArgs& a) {
  echo_config("gen-game", {{"dh", a.dh}, {"dm", a.dm}, {"seed", a.seed}, {"targets", a.targets},
                           {"min_separation", a.min_separation}, {"out", a.out}});
  if (a.dh < 1 || a.dm < 1) throw UsageError("--dh and --dm must be positive");
  if (!a.targets.empty() && a.targets.size() != 2) {
    throw UsageError("--targets takes two values: NASH,STACKELBERG");
  }
  RandomGameOptions opt;
  opt.min_separation = a.min_separation;
  if (!a.targets.empty()) opt.targets = uniform_targets(a.dh, a.targets[0], a.targets[1]);
  const auto p = random_game(a.dh, a.dm, a.seed, opt);
  const std::string name = "random_" + std::to_string(a.dh) + "x" + std::to_string(a.dm) + "_" +
                           std::to_string(a.seed);
  if (a.out.empty() || a.out == "-") {
    std::cout << game_to_json(p, name).dump(2) << '\n';
  } else {
    save_game(a.out, p, name);
    std::cerr << "wrote " << a.out << '\n';
  }
  return 0;
}

// ---- serve / export / analyze ----

struct ServeArgs {
  std::optional<int> port;
  std::optional<std::string> data;
  std::string host = "0.0.0.0";
  std::string games;
  std::string static_dir;
  std::string replay;
  bool research = false;
  int threads = 8;
};

int run_serve(const ServeArgs& a) {
  ServerOptions o;
  apply_environment(o);
  if (a.port) o.port = *a.port;
  if (a.data) o.data_path = *a.data;
  o.host = a.host;
  o.games_dir = a.games;
  o.static_dir = a.static_dir;
  o.research_mode = a.research;
  o.threads = a.threads;
  if (!a.replay.empty()) {
    std::ifstream in(a.replay);
    if (!in) throw std::runtime_error("cannot open replay plan " + a.replay);
    o.replay_plan = session_from_json(json::parse(in));
  }
  echo_config("serve", {{"port", o.port}, {"host", o.host}, {"data", o.data_path.string()},
                        {"games", a.games}, {"static", a.static_dir}, {"replay", a.replay},
                        {"research_mode", a.research}, {"threads", a.threads}});
  if (!o.static_dir.empty() && !fs::is_directory(o.static_dir)) {
    throw UsageError("--static is not a directory: " + a.static_dir);
  }

  // Handle SIGINT/SIGTERM on a dedicated thread so stop() runs outside a
  // signal handler.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  Server server(o);
  const int port = server.bind();
  std::cout << "listening on http://" << o.host << ':' << port << std::endl;

  std::jthread waiter([&server, sigs] {
    int sig = 0;
    sigwait(&sigs, &sig);
    server.stop();
  });
  server.listen();
  // listen() returned without a signal (e.g. socket error): wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return 0;
}

struct ExportArgs {
  std::string data;
  std::string out;
  std::string participant;
};

int run_export(const ExportArgs& a) {
  echo_config("export", {{"data", a.data}, {"out", a.out}, {"participant", a.participant}});
  if (!fs::exists(a.data)) throw std::runtime_error("no data store at " + a.data);
  TrialStore store(a.data);
  TrialFilter filter;
  if (!a.participant.empty()) filter.participant_key = a.participant;
  std::size_t rows = 0;
  if (a.out.empty() || a.out == "-") {
    rows = export_all(store, std::cout, filter);
  } else {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    rows = export_all(store, out, filter);
    out.close();
    if (!out) throw std::runtime_error("cannot write " + a.out);
  }
  std::cerr << "exported " << rows << " rows\n";
  return 0;
}

struct AnalyzeArgs {
  std::string in;
  std::string game;
  std::string out = "analysis";
  double seconds = 5.0;
  bool per_sample = false;
  int bins = 40;
};

int run_analyze(const AnalyzeArgs& a) {
  echo_config("analyze", {{"in", a.in}, {"game", a.game}, {"out", a.out}, {"seconds", a.seconds},
                          {"per_sample_costs", a.per_sample}, {"bins", a.bins}});
  const auto g = load_game(a.game);
  const auto trials = read_export_csv(fs::path(a.in));
  SummaryOptions opt;
  opt.cost_statistic = a.per_sample ? CostStatistic::kPerSample : CostStatistic::kTrialMedian;
  opt.bin_edges = uniform_bin_edges(a.bins);
  const auto stats = analyze_trials(trials, solve_equilibria(g.params), a.seconds, opt);
  const auto files = emit_plots(stats, a.out);

  std::cout << "alpha,trials,median_h,median_m,dist_h_NE,dist_h_SE\n";
  for (const auto& s : stats.per_alpha) {
    std::cout << format_fixed(s.alpha) << ',' << s.trials << ",\"" << vec_text(s.median_h)
              << "\",\"" << vec_text(s.median_m) << "\"," << format_double(s.dist_h_ne) << ','
              << format_double(s.dist_h_se) << '\n';
  }
  std::cerr << "wrote " << files.size() << " files to " << a.out << '\n';
  return 0;
}

void add_sim_options(CLI::App* cmd, SimArgs& a, bool single_run) {
  cmd->add_option("--game", a.game, "Game parameter file (JSON)")->required()->check(CLI::ExistingFile);
  if (single_run) {
    cmd->add_option("--alpha", a.alpha, "AI adaptation rate")->capture_default_str();
    cmd->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--out", a.out, "Output CSV (default stdout)");
    cmd->add_option("--method", a.method, "zeroth-order or simultaneous")->capture_default_str();
  }
  cmd->add_option("--eta", a.eta, "Human step size")->capture_default_str();
  cmd->add_option("--sigma", a.sigma, "Perturbation scale")->capture_default_str();
  cmd->add_option("--T", a.T, "Human iterations")->capture_default_str();
  cmd->add_option("--K", a.K, "AI steps per human iteration")->capture_default_str();
  cmd->add_option("--h0", a.h0, "Initial h: one value or d_H comma-separated");
  cmd->add_option("--m0", a.m0, "Initial m: one value or d_M comma-separated");
  cmd->add_option("--rate-mode", a.rate_mode, "replication, unit or general")->capture_default_str();
  cmd->add_option("--divergence", a.divergence, "State norm treated as divergence")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-AI co-adaptation games: solvers, simulation, data collection, analysis"};
  app.require_subcommand(1);

  EquilibriaArgs eq;
  auto* c_eq = app.add_subcommand("equilibria", "Solve and check Nash and Stackelberg equilibria");
  c_eq->add_option("--game", eq.game, "Game parameter file (JSON)")->required()->check(CLI::ExistingFile);
  c_eq->add_flag("--json", eq.as_json, "Machine-readable output");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate one co-adaptation run");
  add_sim_options(c_sim, sim, true);

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Simulate every (alpha, seed) pair");
  add_sim_options(c_sw, sw.sim, false);
  c_sw->add_option("--alphas", sw.alphas, "Comma-separated adaptation rates")->required();
  c_sw->add_option("--seeds", sw.seeds, "Number of seeds")->capture_default_str();
  c_sw->add_option("--first-seed", sw.first_seed, "First seed")->capture_default_str();
  c_sw->add_option("--threads", sw.threads, "Worker threads (0: all cores)")->capture_default_str();
  c_sw->add_option("--out-dir", sw.out_dir, "Output directory")->capture_default_str();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-game", "Generate a random valid game");
  c_gen->add_option("--dh", gen.dh, "Human action dimension")->capture_default_str();
  c_gen->add_option("--dm", gen.dm, "AI action dimension")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  c_gen->add_option("--targets", gen.targets, "NASH,STACKELBERG target value for every h coordinate")
      ->delimiter(',');
  c_gen->add_option("--min-separation", gen.min_separation, "Minimum |h_NE - h_SE|")
      ->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output file (default stdout)");

  ServeArgs srv;
  auto* c_srv = app.add_subcommand("serve", "Run the data-collection server");
  c_srv->add_option("--port", srv.port, "Port (env PORT, default 8080; 0 picks one)");
  c_srv->add_option("--data", srv.data, "SQLite file (env DATA_PATH)");
  c_srv->add_option("--host", srv.host, "Bind address")->capture_default_str();
  c_srv->add_option("--games", srv.games, "Directory with game_{1x2,2x1,2x2}.json");
  c_srv->add_option("--static", srv.static_dir, "Directory served at /");
  c_srv->add_option("--replay", srv.replay, "Serve this fixed session plan (JSON)");
  c_srv->add_flag("--research-mode", srv.research, "Allow heat-map sessions on every game");
  c_srv->add_option("--threads", srv.threads, "Request worker threads")->capture_default_str();

  ExportArgs ex;
  auto* c_ex = app.add_subcommand("export", "Export stored trials as CSV");
  c_ex->add_option("--data", ex.data, "SQLite file")->required();
  c_ex->add_option("--out", ex.out, "Output CSV (default stdout)");
  c_ex->add_option("--participant", ex.participant, "Only this participant key");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Summarize exported trials and write plots");
  c_an->add_option("--in", an.in, "Export CSV")->required()->check(CLI::ExistingFile);
  c_an->add_option("--game", an.game, "Game parameter file")->required()->check(CLI::ExistingFile);
  c_an->add_option("--out", an.out, "Output directory")->capture_default_str();
  c_an->add_option("--seconds", an.seconds, "Keep the last N seconds of each trial")
      ->capture_default_str();
  c_an->add_flag("--per-sample-costs", an.per_sample,
                 "Cost quartiles over all samples instead of per-trial medians");
  c_an->add_option("--bins", an.bins, "Histogram bins on [-1, 1]")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_eq) return run_equilibria(eq);
    if (*c_sim) return run_simulate(sim);
    if (*c_sw) return run_sweep_cmd(sw);
    if (*c_gen) return run_gen_game(gen);
    if (*c_srv) return run_serve(srv);
    if (*c_ex) return run_export(ex);
    if (*c_an) return run_analyze(an);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
