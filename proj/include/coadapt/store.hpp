#pragma once

// Embedded SQLite store for trial records and session plans.

#include "coadapt/protocol.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

struct sqlite3;

namespace coadapt {

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Same (participant_key, session_id, trial_index) with a different payload.
class ConflictError : public std::runtime_error {
 public:
  ConflictError(const std::string& what, std::int64_t existing_id)
      : std::runtime_error(what), existing_id_(existing_id) {}
  std::int64_t existing_id() const { return existing_id_; }

 private:
  std::int64_t existing_id_;
};

struct StoredTrial {
  std::int64_t trial_id = 0;
  std::string participant_key;
  std::string session_id;
  std::string received_at;  // UTC, ISO 8601 with milliseconds
  TrialRecord record;
};

struct IngestResult {
  std::int64_t trial_id = 0;
  bool inserted = false;
};

struct TrialFilter {
  std::optional<std::string> participant_key;
};

/// Writes go through one connection under a mutex and are committed with
/// synchronous=FULL before returning. Reads open their own connection, so
/// they proceed alongside writes (WAL mode).
class TrialStore {
 public:
  explicit TrialStore(std::filesystem::path path);
  ~TrialStore();
  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  const std::filesystem::path& path() const { return path_; }

  /// Validates, then inserts. A byte-identical resend returns the original
  /// id with inserted = false. Throws RecordFormatError, ConflictError or
  /// StorageError.
  IngestResult ingest(const TrialRecord& record);

  std::int64_t trial_count() const;

  /// Ordered by participant_key, session_id, trial_index.
  void for_each_trial(const TrialFilter& filter,
                      const std::function<void(const StoredTrial&)>& fn) const;
  std::vector<StoredTrial> trials(const TrialFilter& filter = {}) const;

  std::optional<SessionPlan> session(const std::string& participant_key) const;
  /// Stores `plan` unless the key already has one; returns the stored plan.
  SessionPlan put_session_if_absent(const SessionPlan& plan);

 private:
  std::filesystem::path path_;
  sqlite3* writer_ = nullptr;
  std::mutex write_mutex_;
};

/// Canonical serialized form used for storage and duplicate detection.
std::string canonical_payload(const TrialRecord& record);

}  // namespace coadapt
