#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/common/prompt.hpp"
#include "mtkit/common/store.hpp"
#include "mtkit/corpus/corpus.hpp"
#include "mtkit/orchestrator/backend.hpp"

namespace mtkit::orchestrator {

enum class TranslationStatus { kOk, kRefused, kTransportError, kRateLimited, kInvalidResponse };

std::string_view to_string(TranslationStatus status);
TranslationStatus parse_status(std::string_view name);

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct TranslationRecord {
  std::int64_t record_id = 0;
  corpus::MessageKey message;
  std::string backend_id;
  std::string prompt_id;
  std::string prompt_hash;
  std::optional<std::string> output_text;
  TranslationStatus status = TranslationStatus::kOk;
  std::optional<Usage> usage;
  std::int64_t latency_ms = 0;
  int attempt_count = 0;
  std::string created_at;
};

struct BackendCounts {
  std::size_t ok = 0;
  std::size_t refused = 0;
  // transport_error, rate_limited and invalid_response.
  std::size_t failed = 0;

  std::size_t total() const { return ok + refused + failed; }
};

struct BatchReport {
  std::map<std::string, BackendCounts> per_backend;

  std::size_t total() const;
};

struct BestPick {
  corpus::MessageKey message;
  std::int64_t record_id = 0;
  std::string rater_id;
  std::string picked_at;
};

class RateLimiter;

// Runs messages through backends and keeps every attempt in the
// append-only translations table. Safe to call from several threads.
class Orchestrator {
 public:
  explicit Orchestrator(Database& db);
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  // Throws ConflictError for a known backend_id.
  std::string register_backend(const BackendConfig& config);
  std::vector<BackendConfig> backends();
  // Throws NotFound.
  BackendConfig backend(const std::string& backend_id);

  // Idempotent for an identical (prompt_id, text). A changed text under an
  // existing id is stored as a new version; prompt() returns the latest.
  PromptTemplate register_prompt(const PromptTemplate& prompt);
  // Throws NotFound.
  PromptTemplate prompt(const std::string& prompt_id);

  // Registers the config's backends and filled prompt slots, skipping
  // backends that already exist. Returns the ids newly registered.
  std::vector<std::string> apply_config(const ToolkitConfig& config);

  // Appends exactly one record. Throws NotFound for an unknown message,
  // backend or prompt and AuthError when the backend's key variable is
  // unset. Vendor failures are statuses on the record, not exceptions.
  TranslationRecord translate(const corpus::MessageKey& message,
                              const std::string& backend_id,
                              const std::string& prompt_id);

  // One record per (message, backend). Preconditions for all pairs are
  // checked before the first request.
  BatchReport translate_batch(const std::vector<corpus::MessageKey>& messages,
                              const std::vector<std::string>& backend_ids,
                              const std::string& prompt_id, std::size_t max_in_flight);

  // Throws NotFound.
  TranslationRecord record(std::int64_t record_id);
  // Records in insertion order, optionally for one message and backend.
  std::vector<TranslationRecord> records(
      const std::optional<corpus::MessageKey>& message = std::nullopt,
      const std::optional<std::string>& backend_id = std::nullopt);

  // Replaces the rater's earlier pick for the message. Throws NotFound for
  // an unknown record and InvalidPick for a record that is not ok or
  // belongs to another message.
  BestPick record_best_pick(const corpus::MessageKey& message, std::int64_t record_id,
                            const std::string& rater_id);
  std::optional<BestPick> best_pick(const corpus::MessageKey& message,
                                    const std::string& rater_id);
  std::vector<BestPick> best_picks(const std::optional<std::string>& rater_id = std::nullopt);
  // Picks per backend.
  std::map<std::string, std::size_t> pick_tally(
      const std::optional<std::string>& rater_id = std::nullopt);

 private:
  struct Outcome;

  Outcome run_http(const BackendConfig& config, const PromptTemplate& prompt,
                   const std::string& source, const std::string& secret,
                   const std::string& message_label);
  TranslationRecord translate_checked(const corpus::ChatMessage& message,
                                      const BackendConfig& config,
                                      const PromptTemplate& prompt);
  TranslationRecord persist(TranslationRecord record);
  RateLimiter& limiter(const BackendConfig& config);
  std::chrono::milliseconds backoff(const RetryPolicy& retry, int attempt);

  Database& db_;
  corpus::Corpus corpus_;
  std::mutex limiters_mutex_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
  std::mutex jitter_mutex_;
  std::mt19937_64 jitter_;
};

// Backend with the most picks; ties go to the smaller id.
std::optional<std::string> best_backend(const std::map<std::string, std::size_t>& tally);

}  // namespace mtkit::orchestrator
