#include "coadapt/store.hpp"

#include <sqlite3.h>

#include <chrono>
#include <ctime>
#include <sstream>

namespace coadapt {

namespace {

[[noreturn]] void fail(sqlite3* db, const std::string& what) {
  throw StorageError(what + ": " + (db ? sqlite3_errmsg(db) : "no connection"));
}

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StorageError(std::string("sqlite: ") + msg);
  }
}

sqlite3* open_db(const std::filesystem::path& path, bool readonly) {
  sqlite3* db = nullptr;
  const int flags = readonly ? SQLITE_OPEN_READONLY
                             : SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE;
  if (sqlite3_open_v2(path.c_str(), &db, flags | SQLITE_OPEN_NOMUTEX, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw StorageError("cannot open " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db, 10000);
  return db;
}

struct Db {
  sqlite3* db;
  ~Db() { sqlite3_close(db); }
};

class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) fail(db, "prepare");
  }
  ~Stmt() { sqlite3_finalize(stmt_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  void bind(int i, const std::string& s) {
    sqlite3_bind_text(stmt_, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
  }
  void bind(int i, std::int64_t v) { sqlite3_bind_int64(stmt_, i, v); }

  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail(db_, "step");
  }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::string text(int col) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
             : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    exec(db_, "COMMIT");
    done_ = true;
  }

 private:
  sqlite3* db_;
  bool done_ = false;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace

std::string canonical_payload(const TrialRecord& record) {
  return record_to_json(record).dump();
}

TrialStore::TrialStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  writer_ = open_db(path_, false);
  try {
    exec(writer_, "PRAGMA journal_mode=WAL");
    exec(writer_, "PRAGMA synchronous=FULL");
    exec(writer_,
         "CREATE TABLE IF NOT EXISTS trials ("
         " id INTEGER PRIMARY KEY AUTOINCREMENT,"
         " participant_key TEXT NOT NULL,"
         " session_id TEXT NOT NULL,"
         " trial_index INTEGER NOT NULL,"
         " received_at TEXT NOT NULL,"
         " payload TEXT NOT NULL,"
         " UNIQUE (participant_key, session_id, trial_index))");
    exec(writer_,
         "CREATE TABLE IF NOT EXISTS sessions ("
         " participant_key TEXT PRIMARY KEY,"
         " created_at TEXT NOT NULL,"
         " plan TEXT NOT NULL)");
  } catch (...) {
    sqlite3_close(writer_);
    throw;
  }
}

TrialStore::~TrialStore() { sqlite3_close(writer_); }

IngestResult TrialStore::ingest(const TrialRecord& record) {
  validate_record(record);
  const std::string payload = canonical_payload(record);

  std::lock_guard lock(write_mutex_);
  Transaction tx(writer_);
  {
    Stmt find(writer_,
              "SELECT id, payload FROM trials"
              " WHERE participant_key = ?1 AND session_id = ?2 AND trial_index = ?3");
    find.bind(1, record.participant_key);
    find.bind(2, record.session_id);
    find.bind(3, std::int64_t{record.trial_index});
    if (find.step()) {
      const auto id = find.integer(0);
      if (find.text(1) != payload) {
        throw ConflictError("trial " + std::to_string(record.trial_index) + " of participant " +
                                record.participant_key + " already stored with other content",
                            id);
      }
      return {id, false};
    }
  }
  Stmt ins(writer_,
           "INSERT INTO trials (participant_key, session_id, trial_index, received_at, payload)"
           " VALUES (?1, ?2, ?3, ?4, ?5)");
  ins.bind(1, record.participant_key);
  ins.bind(2, record.session_id);
  ins.bind(3, std::int64_t{record.trial_index});
  ins.bind(4, utc_now());
  ins.bind(5, payload);
  ins.step();
  const auto id = sqlite3_last_insert_rowid(writer_);
  tx.commit();
  return {id, true};
}

std::int64_t TrialStore::trial_count() const {
  Db db{open_db(path_, true)};
  Stmt q(db.db, "SELECT COUNT(*) FROM trials");
  q.step();
  return q.integer(0);
}

void TrialStore::for_each_trial(const TrialFilter& filter,
                                const std::function<void(const StoredTrial&)>& fn) const {
  Db db{open_db(path_, true)};
  const char* sql =
      filter.participant_key
          ? "SELECT id, participant_key, session_id, received_at, payload FROM trials"
            " WHERE participant_key = ?1 ORDER BY participant_key, session_id, trial_index"
          : "SELECT id, participant_key, session_id, received_at, payload FROM trials"
            " ORDER BY participant_key, session_id, trial_index";
  Stmt q(db.db, sql);
  if (filter.participant_key) q.bind(1, *filter.participant_key);
  while (q.step()) {
    StoredTrial st;
    st.trial_id = q.integer(0);
    st.participant_key = q.text(1);
    st.session_id = q.text(2);
    st.received_at = q.text(3);
    try {
      st.record = record_from_json(nlohmann::json::parse(q.text(4)));
    } catch (const std::exception& e) {
      throw StorageError("stored trial " + std::to_string(st.trial_id) +
                         " is unreadable: " + e.what());
    }
    fn(st);
  }
}

std::vector<StoredTrial> TrialStore::trials(const TrialFilter& filter) const {
  std::vector<StoredTrial> out;
  for_each_trial(filter, [&](const StoredTrial& t) { out.push_back(t); });
  return out;
}

std::optional<SessionPlan> TrialStore::session(const std::string& participant_key) const {
  Db db{open_db(path_, true)};
  Stmt q(db.db, "SELECT plan FROM sessions WHERE participant_key = ?1");
  q.bind(1, participant_key);
  if (!q.step()) return std::nullopt;
  return session_from_json(nlohmann::json::parse(q.text(0)));
}

SessionPlan TrialStore::put_session_if_absent(const SessionPlan& plan) {
  std::lock_guard lock(write_mutex_);
  Transaction tx(writer_);
  {
    Stmt find(writer_, "SELECT plan FROM sessions WHERE participant_key = ?1");
    find.bind(1, plan.participant_key);
    if (find.step()) return session_from_json(nlohmann::json::parse(find.text(0)));
  }
  Stmt ins(writer_, "INSERT INTO sessions (participant_key, created_at, plan) VALUES (?1, ?2, ?3)");
  ins.bind(1, plan.participant_key);
  ins.bind(2, utc_now());
  ins.bind(3, session_to_json(plan).dump());
  ins.step();
  tx.commit();
  return plan;
}

}  // namespace coadapt
