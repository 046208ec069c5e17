#include "mtkit/common/store.hpp"

#include <chrono>
#include <ctime>
#include <utility>

#include "mtkit/common/errors.hpp"

namespace mtkit {
namespace {

class SqliteError : public Error {
 public:
  SqliteError(const std::string& what, int code) : Error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

[[noreturn]] void fail(sqlite3* db, int rc, std::string_view context) {
  throw SqliteError(std::string(context) + ": " + sqlite3_errmsg(db),
                    rc == SQLITE_CONSTRAINT ? SQLITE_CONSTRAINT
                                            : sqlite3_extended_errcode(db));
}

constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS schema_info (version INTEGER NOT NULL);

CREATE TABLE IF NOT EXISTS messages (
  channel_id        TEXT    NOT NULL,
  message_id        INTEGER NOT NULL CHECK (message_id > 0),
  timestamp         TEXT    NOT NULL,
  unix_time         INTEGER NOT NULL,
  text              TEXT    NOT NULL,
  has_media         INTEGER NOT NULL,
  outer_ws_trimmed  INTEGER NOT NULL,
  source_meta       TEXT    NOT NULL,
  PRIMARY KEY (channel_id, message_id)
);

CREATE TABLE IF NOT EXISTS ground_truth (
  id             INTEGER PRIMARY KEY,
  entry_key      TEXT NOT NULL,
  kind           TEXT NOT NULL CHECK (kind IN ('message', 'vocabulary')),
  channel_id     TEXT,
  message_id     INTEGER,
  source_text    TEXT NOT NULL,
  target_text    TEXT NOT NULL CHECK (length(target_text) > 0),
  translator_id  TEXT NOT NULL,
  UNIQUE (entry_key, translator_id),
  CHECK ((kind = 'vocabulary') = (message_id IS NULL)),
  FOREIGN KEY (channel_id, message_id) REFERENCES messages (channel_id, message_id)
);

CREATE TABLE IF NOT EXISTS splits (
  name        TEXT    NOT NULL,
  channel_id  TEXT    NOT NULL,
  message_id  INTEGER NOT NULL,
  assignment  TEXT    NOT NULL CHECK (assignment IN ('train_val', 'test')),
  policy      TEXT    NOT NULL,
  seed        INTEGER,
  PRIMARY KEY (name, channel_id, message_id),
  FOREIGN KEY (channel_id, message_id) REFERENCES messages (channel_id, message_id)
);

CREATE TABLE IF NOT EXISTS backends (
  backend_id  TEXT PRIMARY KEY,
  kind        TEXT NOT NULL,
  model_name  TEXT NOT NULL,
  config      TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS prompts (
  prompt_id     TEXT NOT NULL,
  content_hash  TEXT NOT NULL,
  text          TEXT NOT NULL,
  created_at    TEXT NOT NULL,
  PRIMARY KEY (prompt_id, content_hash)
);

CREATE TABLE IF NOT EXISTS translations (
  record_id      INTEGER PRIMARY KEY AUTOINCREMENT,
  channel_id     TEXT    NOT NULL,
  message_id     INTEGER NOT NULL,
  backend_id     TEXT    NOT NULL,
  prompt_id      TEXT    NOT NULL,
  prompt_hash    TEXT    NOT NULL,
  output_text    TEXT,
  status         TEXT    NOT NULL CHECK (status IN
                   ('ok', 'refused', 'transport_error', 'rate_limited', 'invalid_response')),
  input_tokens   INTEGER,
  output_tokens  INTEGER,
  latency_ms     INTEGER NOT NULL,
  attempt_count  INTEGER NOT NULL,
  created_at     TEXT    NOT NULL,
  CHECK ((status = 'ok') = (output_text IS NOT NULL))
);
CREATE TRIGGER IF NOT EXISTS translations_no_update BEFORE UPDATE ON translations
BEGIN SELECT RAISE(ABORT, 'translations are append-only'); END;
CREATE TRIGGER IF NOT EXISTS translations_no_delete BEFORE DELETE ON translations
BEGIN SELECT RAISE(ABORT, 'translations are append-only'); END;

CREATE TABLE IF NOT EXISTS best_picks (
  channel_id  TEXT    NOT NULL,
  message_id  INTEGER NOT NULL,
  rater_id    TEXT    NOT NULL,
  record_id   INTEGER NOT NULL REFERENCES translations (record_id),
  picked_at   TEXT    NOT NULL,
  PRIMARY KEY (channel_id, message_id, rater_id)
);

CREATE TABLE IF NOT EXISTS finetune_jobs (
  job_row        INTEGER PRIMARY KEY,
  base_model     TEXT NOT NULL,
  file_digest    TEXT NOT NULL,
  vendor_job_id  TEXT,
  result_model   TEXT,
  params         TEXT NOT NULL,
  created_at     TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS survey_questions (
  question_id        TEXT PRIMARY KEY,
  survey_id          TEXT    NOT NULL,
  order_index        INTEGER NOT NULL,
  source_text        TEXT    NOT NULL,
  option_a_text      TEXT    NOT NULL,
  option_b_text      TEXT    NOT NULL,
  model_a            TEXT    NOT NULL,
  model_b            TEXT    NOT NULL,
  indistinguishable  INTEGER NOT NULL,
  UNIQUE (survey_id, order_index),
  CHECK (model_a <> model_b)
);

CREATE TABLE IF NOT EXISTS respondents (
  respondent_id  TEXT PRIMARY KEY,
  english_level  TEXT    NOT NULL,
  cyber_level    TEXT    NOT NULL,
  consented      INTEGER NOT NULL,
  created_at     TEXT    NOT NULL
);

CREATE TABLE IF NOT EXISTS votes (
  vote_id          INTEGER PRIMARY KEY AUTOINCREMENT,
  respondent_id    TEXT NOT NULL REFERENCES respondents (respondent_id),
  question_id      TEXT NOT NULL,
  chosen_position  TEXT NOT NULL CHECK (chosen_position IN ('a', 'b')),
  captured_at      TEXT NOT NULL,
  UNIQUE (respondent_id, question_id)
);
CREATE TRIGGER IF NOT EXISTS votes_no_update BEFORE UPDATE ON votes
BEGIN SELECT RAISE(ABORT, 'votes are append-only'); END;
CREATE TRIGGER IF NOT EXISTS votes_no_delete BEFORE DELETE ON votes
BEGIN SELECT RAISE(ABORT, 'votes are append-only'); END;
)sql";

}  // namespace

Statement::Statement(Statement&& other) noexcept
    : db_(std::exchange(other.db_, nullptr)),
      stmt_(std::exchange(other.stmt_, nullptr)) {}

Statement& Statement::operator=(Statement&& other) noexcept {
  if (this != &other) {
    sqlite3_finalize(stmt_);
    db_ = std::exchange(other.db_, nullptr);
    stmt_ = std::exchange(other.stmt_, nullptr);
  }
  return *this;
}

Statement::~Statement() { sqlite3_finalize(stmt_); }

Statement& Statement::bind(int index, std::string_view value) {
  const int rc = sqlite3_bind_text64(stmt_, index, value.data(), value.size(),
                                     SQLITE_TRANSIENT, SQLITE_UTF8);
  if (rc != SQLITE_OK) fail(db_, rc, "bind text");
  return *this;
}

Statement& Statement::bind(int index, std::int64_t value) {
  const int rc = sqlite3_bind_int64(stmt_, index, value);
  if (rc != SQLITE_OK) fail(db_, rc, "bind int");
  return *this;
}

Statement& Statement::bind(int index, double value) {
  const int rc = sqlite3_bind_double(stmt_, index, value);
  if (rc != SQLITE_OK) fail(db_, rc, "bind double");
  return *this;
}

Statement& Statement::bind_null(int index) {
  const int rc = sqlite3_bind_null(stmt_, index);
  if (rc != SQLITE_OK) fail(db_, rc, "bind null");
  return *this;
}

bool Statement::step() {
  const int rc = sqlite3_step(stmt_);
  if (rc == SQLITE_ROW) return true;
  if (rc == SQLITE_DONE) return false;
  fail(db_, rc, "step");
}

void Statement::run() {
  while (step()) {
  }
  reset();
}

void Statement::reset() {
  sqlite3_reset(stmt_);
  sqlite3_clear_bindings(stmt_);
}

int Statement::column_count() const { return sqlite3_column_count(stmt_); }

bool Statement::is_null(int column) const {
  return sqlite3_column_type(stmt_, column) == SQLITE_NULL;
}

std::string Statement::text(int column) const {
  const auto* p = sqlite3_column_text(stmt_, column);
  const int n = sqlite3_column_bytes(stmt_, column);
  return p ? std::string(reinterpret_cast<const char*>(p),
                         static_cast<std::size_t>(n))
           : std::string();
}

std::optional<std::string> Statement::optional_text(int column) const {
  if (is_null(column)) return std::nullopt;
  return text(column);
}

std::int64_t Statement::int64(int column) const {
  return sqlite3_column_int64(stmt_, column);
}

std::optional<std::int64_t> Statement::optional_int64(int column) const {
  if (is_null(column)) return std::nullopt;
  return int64(column);
}

double Statement::real(int column) const {
  return sqlite3_column_double(stmt_, column);
}

Database::Database(const std::filesystem::path& path) {
  const int flags =
      SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
  const int rc = sqlite3_open_v2(path.c_str(), &db_, flags, nullptr);
  if (rc != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw IoError("cannot open database " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA foreign_keys = ON;");
  create_schema();
}

Database::~Database() { sqlite3_close(db_); }

void Database::exec(std::string_view sql) {
  char* err = nullptr;
  const std::string owned(sql);
  const int rc = sqlite3_exec(db_, owned.c_str(), nullptr, nullptr, &err);
  if (rc != SQLITE_OK) {
    std::string msg = err ? err : sqlite3_errmsg(db_);
    sqlite3_free(err);
    throw SqliteError("sql: " + msg, rc);
  }
}

Statement Database::prepare(std::string_view sql) {
  sqlite3_stmt* stmt = nullptr;
  const int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()),
                                    &stmt, nullptr);
  if (rc != SQLITE_OK) fail(db_, rc, "prepare");
  return Statement(db_, stmt);
}

std::int64_t Database::last_insert_rowid() const {
  return sqlite3_last_insert_rowid(db_);
}

void Database::create_schema() {
  Transaction tx(*this);
  exec(kSchema);
  auto count = prepare("SELECT COUNT(*) FROM schema_info");
  count.step();
  if (count.int64(0) == 0) exec("INSERT INTO schema_info (version) VALUES (1)");
  tx.commit();
}

Database::Transaction::Transaction(Database& db)
    : db_(db), lock_(db.write_mutex()) {
  db_.exec("BEGIN IMMEDIATE");
}

Database::Transaction::~Transaction() {
  if (!done_) {
    try {
      db_.exec("ROLLBACK");
    } catch (...) {
    }
  }
}

void Database::Transaction::commit() {
  db_.exec("COMMIT");
  done_ = true;
}

bool is_constraint_violation(const std::exception& e) {
  const auto* se = dynamic_cast<const SqliteError*>(&e);
  return se && (se->code() & 0xff) == SQLITE_CONSTRAINT;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::time_point_cast<std::chrono::milliseconds>(now);
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  const auto ms = secs.time_since_epoch().count() % 1000;
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace mtkit
