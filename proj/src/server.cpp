#include "coadapt/server.hpp"

#include "coadapt/game_io.hpp"

#include <httplib.h>

#include <cstdlib>
#include <map>
#include <ostream>

namespace coadapt {

using nlohmann::json;

namespace {

json error_body(const std::string& msg) { return json{{"error", msg}}; }

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

std::size_t export_all(const TrialStore& store, std::ostream& out, const TrialFilter& filter) {
  out << kExportHeader << '\n';
  std::size_t rows = 0;
  store.for_each_trial(filter, [&](const StoredTrial& t) { rows += write_export_rows(out, t.record); });
  return rows;
}

std::uint64_t session_seed(std::string_view key) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void apply_environment(ServerOptions& opts) {
  if (const char* port = std::getenv("PORT"); port && *port) {
    try {
      opts.port = std::stoi(port);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("PORT is not a number: ") + port);
    }
  }
  if (const char* data = std::getenv("DATA_PATH"); data && *data) opts.data_path = data;
}

struct Server::Impl {
  ServerOptions opts;
  TrialStore store;
  httplib::Server http;
  std::map<GameVersion, GameParams> games;
  int bound_port = -1;

  explicit Impl(ServerOptions o) : opts(std::move(o)), store(opts.data_path) {
    if (!opts.games_dir.empty()) {
      for (auto v : {GameVersion::k1x2, GameVersion::k2x1, GameVersion::k2x2}) {
        const auto file = opts.games_dir / ("game_" + to_string(v) + ".json");
        if (std::filesystem::exists(file)) games.emplace(v, load_game(file).params);
      }
    }
    http.new_task_queue = [n = opts.threads] { return new httplib::ThreadPool(n); };
    routes();
  }

  void routes() {
    http.Post("/api/trials", [this](const httplib::Request& req, httplib::Response& res) {
      TrialRecord rec;
      try {
        rec = record_from_json(json::parse(req.body));
      } catch (const json::exception& e) {
        return send_json(res, 400, error_body(std::string("invalid JSON: ") + e.what()));
      } catch (const RecordFormatError& e) {
        return send_json(res, 400, error_body(e.what()));
      }
      try {
        const auto r = store.ingest(rec);
        send_json(res, 200, {{"accepted", true}, {"trial_id", r.trial_id}, {"duplicate", !r.inserted}});
      } catch (const ConflictError& e) {
        send_json(res, 409, {{"accepted", false}, {"trial_id", e.existing_id()}, {"error", e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, error_body(e.what()));
      }
    });

    http.Get("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      if (opts.replay_plan) return send_json(res, 200, session_to_json(*opts.replay_plan));
      GameVersion version;
      DisplayMode mode;
      try {
        version = parse_game_version(req.get_param_value("version"));
        mode = parse_display_mode(req.get_param_value("mode"));
      } catch (const std::invalid_argument& e) {
        return send_json(res, 400, error_body(e.what()));
      }
      const std::string key = req.get_param_value("key");
      if (key.empty()) return send_json(res, 400, error_body("missing key"));
      const auto game = games.find(version);
      if (game == games.end()) {
        return send_json(res, 500, error_body("game " + to_string(version) + " not configured"));
      }
      try {
        const auto plan = build_session(version, mode, session_seed(key), key, game->second,
                                        opts.research_mode);
        const auto stored = store.put_session_if_absent(plan);
        if (stored.game_version != version || stored.display_mode != mode) {
          return send_json(res, 409, error_body("key already has a " +
                                                to_string(stored.game_version) + "/" +
                                                to_string(stored.display_mode) + " session"));
        }
        send_json(res, 200, session_to_json(stored));
      } catch (const std::invalid_argument& e) {
        send_json(res, 400, error_body(e.what()));
      } catch (const std::exception& e) {
        send_json(res, 500, error_body(e.what()));
      }
    });

    http.Get("/api/game", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto v = parse_game_version(req.get_param_value("version"));
        const auto it = games.find(v);
        if (it == games.end()) return send_json(res, 404, error_body("game not configured"));
        send_json(res, 200, game_to_json(it->second, to_string(v)));
      } catch (const std::invalid_argument& e) {
        send_json(res, 400, error_body(e.what()));
      }
    });

    http.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"ok", true}, {"trials", store.trial_count()}});
    });

    if (!opts.static_dir.empty()) http.set_mount_point("/", opts.static_dir.string());
  }
};

Server::Server(ServerOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}
Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const auto& o = impl_->opts;
  int port = o.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(o.host);
  } else if (!impl_->http.bind_to_port(o.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  impl_->bound_port = port;
  return port;
}

void Server::listen() {
  bind();
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

TrialStore& Server::store() { return impl_->store; }

}  // namespace coadapt
