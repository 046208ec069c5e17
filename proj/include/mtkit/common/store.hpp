#pragma once

#include <sqlite3.h>

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace mtkit {

class Database;

// Prepared statement. Bind indices are 1-based, column indices 0-based,
// following SQLite.
class Statement {
 public:
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;
  Statement(Statement&& other) noexcept;
  Statement& operator=(Statement&& other) noexcept;
  ~Statement();

  Statement& bind(int index, std::string_view value);
  Statement& bind(int index, const char* value) {
    return bind(index, std::string_view(value));
  }
  Statement& bind(int index, std::int64_t value);
  Statement& bind(int index, int value) {
    return bind(index, static_cast<std::int64_t>(value));
  }
  Statement& bind(int index, double value);
  Statement& bind_null(int index);
  template <typename T>
  Statement& bind(int index, const std::optional<T>& value) {
    return value ? bind(index, *value) : bind_null(index);
  }

  // Advances; true while a row is available.
  bool step();
  // Runs to completion, for statements without result rows.
  void run();
  void reset();

  int column_count() const;
  bool is_null(int column) const;
  std::string text(int column) const;
  std::optional<std::string> optional_text(int column) const;
  std::int64_t int64(int column) const;
  std::optional<std::int64_t> optional_int64(int column) const;
  double real(int column) const;

 private:
  friend class Database;
  Statement(sqlite3* db, sqlite3_stmt* stmt) : db_(db), stmt_(stmt) {}

  sqlite3* db_ = nullptr;
  sqlite3_stmt* stmt_ = nullptr;
};

// One embedded single-file database holding every table of the toolkit:
//   messages, ground_truth, splits                 (corpus)
//   backends, prompts, translations, best_picks    (orchestrator)
//   finetune_jobs                                  (finetune)
//   survey_questions, respondents, votes           (evaluation harness)
// The translations and votes tables are append-only (enforced by triggers).
class Database {
 public:
  // ":memory:" opens a private in-memory database.
  explicit Database(const std::filesystem::path& path);
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;
  ~Database();

  void exec(std::string_view sql);
  Statement prepare(std::string_view sql);
  std::int64_t last_insert_rowid() const;

  // Serialises writers. Hold it for the duration of a Transaction.
  std::recursive_mutex& write_mutex() noexcept { return write_mutex_; }

  class Transaction {
   public:
    explicit Transaction(Database& db);
    Transaction(const Transaction&) = delete;
    Transaction& operator=(const Transaction&) = delete;
    ~Transaction();
    void commit();

   private:
    Database& db_;
    std::unique_lock<std::recursive_mutex> lock_;
    bool done_ = false;
  };

 private:
  void create_schema();

  sqlite3* db_ = nullptr;
  std::recursive_mutex write_mutex_;
};

// True when the SQLite error was a UNIQUE / PRIMARY KEY violation.
bool is_constraint_violation(const std::exception& e);

std::string utc_now_iso8601();

}  // namespace mtkit
