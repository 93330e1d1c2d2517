#pragma once

// HTTP ingest service and CSV export.

#include "coadapt/export_format.hpp"
#include "coadapt/protocol.hpp"
#include "coadapt/store.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace coadapt {

/// One row per sample, 17 significant digits, empty fields for absent
/// dimensions. Returns the number of data rows written.
std::size_t export_all(const TrialStore& store, std::ostream& out,
                       const TrialFilter& filter = {});

/// Deterministic per-participant shuffle seed (64-bit FNV-1a of the key).
std::uint64_t session_seed(std::string_view participant_key);

struct ServerOptions {
  std::string host = "0.0.0.0";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_path = "coadapt.sqlite";
  std::filesystem::path games_dir;   // game_{1x2,2x1,2x2}.json
  std::filesystem::path static_dir;  // served at /, optional
  std::optional<SessionPlan> replay_plan;
  bool research_mode = false;
  int threads = 8;
};

/// Reads PORT and DATA_PATH into `opts` when set.
void apply_environment(ServerOptions& opts);

class Server {
 public:
  explicit Server(ServerOptions opts);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the bound port. Throws on failure.
  int bind();
  /// Blocks until stop(). Calls bind() first if needed.
  void listen();
  void stop();
  bool running() const;

  TrialStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace coadapt
