#include "mtkit/orchestrator/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mtkit/common/errors.hpp"
#include "mtkit/orchestrator/http.hpp"

namespace mtkit::orchestrator {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Requests are handed out on a fixed grid: each acquire takes the next slot
// at least 60/rate seconds after the previous one.
class RateLimiter {
 public:
  explicit RateLimiter(double per_minute)
      : spacing_(per_minute > 0.0
                     ? std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(60.0 / per_minute))
                     : Clock::duration::zero()) {}

  void acquire() {
    if (spacing_ == Clock::duration::zero()) return;
    Clock::time_point slot;
    {
      std::lock_guard lock(mutex_);
      slot = std::max(Clock::now(), next_);
      next_ = slot + spacing_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  const Clock::duration spacing_;
  std::mutex mutex_;
  Clock::time_point next_{};
};

struct Orchestrator::Outcome {
  TranslationStatus status = TranslationStatus::kTransportError;
  std::optional<std::string> output;
  std::optional<Usage> usage;
  int attempts = 0;
};

namespace {

std::int64_t count_words(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (const char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

const json* at_pointer(const json& doc, const std::string& pointer) {
  if (pointer.empty()) return nullptr;
  try {
    const json::json_pointer p(pointer);
    return doc.contains(p) ? &doc.at(p) : nullptr;
  } catch (const json::exception&) {
    return nullptr;
  }
}

bool is_marker(const json* value, const std::vector<std::string>& markers) {
  return value && value->is_string() &&
         std::find(markers.begin(), markers.end(), value->get<std::string>()) != markers.end();
}

bool refusal_error(const json& doc, const std::vector<std::string>& markers) {
  for (const char* p : {"/error/code", "/error/type", "/error/innererror/code", "/code"})
    if (is_marker(at_pointer(doc, p), markers)) return true;
  return false;
}

json request_body(const BackendConfig& config, const PromptTemplate& prompt,
                  const std::string& source) {
  json body;
  body["model"] = config.model_name;
  body["messages"] = json::array({{{"role", "system"}, {"content", prompt.text}},
                                  {{"role", "user"}, {"content", source}}});
  body["temperature"] = config.temperature;
  body[config.http.max_tokens_field] = config.max_output_tokens;
  for (const auto& [key, value] : config.extra) {
    auto parsed = json::parse(value, nullptr, false);
    body[key] = parsed.is_discarded() ? json(value) : std::move(parsed);
  }
  return body;
}

std::optional<std::chrono::milliseconds> retry_after(const HttpResponse& response) {
  for (const auto& [k, v] : response.headers) {
    if (k.size() != 11) continue;
    std::string lower(k);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower != "retry-after") continue;
    char* end = nullptr;
    const double seconds = std::strtod(v.c_str(), &end);
    if (end != v.c_str() && seconds >= 0.0)
      return std::chrono::milliseconds(static_cast<std::int64_t>(seconds * 1000.0));
  }
  return std::nullopt;
}

std::optional<std::string> secret_for(const BackendConfig& config) {
  if (config.kind != BackendKind::kChatCompletionHttp || config.auth_env_var.empty())
    return std::string();
  const char* value = std::getenv(config.auth_env_var.c_str());
  if (!value || !*value) return std::nullopt;
  return std::string(value);
}

std::string require_secret(const BackendConfig& config) {
  auto secret = secret_for(config);
  if (!secret)
    throw AuthError(fmt::format("backend '{}': environment variable {} is not set",
                                config.backend_id, config.auth_env_var));
  return *secret;
}

constexpr std::string_view kRecordColumns =
    "record_id, channel_id, message_id, backend_id, prompt_id, prompt_hash, output_text, "
    "status, input_tokens, output_tokens, latency_ms, attempt_count, created_at";

TranslationRecord read_record(Statement& st) {
  TranslationRecord r;
  r.record_id = st.int64(0);
  r.message = {st.text(1), st.int64(2)};
  r.backend_id = st.text(3);
  r.prompt_id = st.text(4);
  r.prompt_hash = st.text(5);
  r.output_text = st.optional_text(6);
  r.status = parse_status(st.text(7));
  if (!st.is_null(8) && !st.is_null(9)) r.usage = Usage{st.int64(8), st.int64(9)};
  r.latency_ms = st.int64(10);
  r.attempt_count = static_cast<int>(st.int64(11));
  r.created_at = st.text(12);
  return r;
}

BestPick read_pick(Statement& st) {
  return {{st.text(0), st.int64(1)}, st.int64(2), st.text(3), st.text(4)};
}

}  // namespace

std::string_view to_string(TranslationStatus status) {
  switch (status) {
    case TranslationStatus::kOk: return "ok";
    case TranslationStatus::kRefused: return "refused";
    case TranslationStatus::kTransportError: return "transport_error";
    case TranslationStatus::kRateLimited: return "rate_limited";
    case TranslationStatus::kInvalidResponse: return "invalid_response";
  }
  return "invalid_response";
}

TranslationStatus parse_status(std::string_view name) {
  for (auto s : {TranslationStatus::kOk, TranslationStatus::kRefused,
                 TranslationStatus::kTransportError, TranslationStatus::kRateLimited,
                 TranslationStatus::kInvalidResponse})
    if (to_string(s) == name) return s;
  throw InvalidInput(fmt::format("unknown translation status '{}'", name));
}

std::size_t BatchReport::total() const {
  std::size_t n = 0;
  for (const auto& [id, counts] : per_backend) n += counts.total();
  return n;
}

Orchestrator::Orchestrator(Database& db)
    : db_(db), corpus_(db), jitter_(std::random_device{}()) {}

Orchestrator::~Orchestrator() = default;

std::string Orchestrator::register_backend(const BackendConfig& config) {
  validate(config);
  Database::Transaction tx(db_);
  auto st = db_.prepare(
      "INSERT INTO backends (backend_id, kind, model_name, config) VALUES (?1, ?2, ?3, ?4)");
  st.bind(1, config.backend_id)
      .bind(2, to_string(config.kind))
      .bind(3, config.model_name)
      .bind(4, backend_to_json(config));
  try {
    st.run();
  } catch (const std::exception& e) {
    if (is_constraint_violation(e))
      throw ConflictError(fmt::format("backend '{}' is already registered", config.backend_id));
    throw;
  }
  tx.commit();
  spdlog::info("registered backend {} ({}, model {})", config.backend_id,
               to_string(config.kind), config.model_name);
  return config.backend_id;
}

std::vector<BackendConfig> Orchestrator::backends() {
  auto st = db_.prepare("SELECT config FROM backends ORDER BY backend_id");
  std::vector<BackendConfig> out;
  while (st.step()) out.push_back(backend_from_json(st.text(0)));
  return out;
}

BackendConfig Orchestrator::backend(const std::string& backend_id) {
  auto st = db_.prepare("SELECT config FROM backends WHERE backend_id = ?1");
  st.bind(1, backend_id);
  if (!st.step()) throw NotFound(fmt::format("no backend '{}'", backend_id));
  return backend_from_json(st.text(0));
}

PromptTemplate Orchestrator::register_prompt(const PromptTemplate& prompt) {
  if (prompt.prompt_id.empty()) throw InvalidInput("prompt_id must not be empty");
  if (prompt.text.empty()) throw InvalidInput("prompt text must not be empty");
  auto stored = make_prompt(prompt.prompt_id, prompt.text);
  if (!prompt.content_hash.empty() && prompt.content_hash != stored.content_hash)
    throw InvalidInput(fmt::format("prompt '{}': content hash does not match its text",
                                   prompt.prompt_id));
  Database::Transaction tx(db_);
  auto st = db_.prepare(
      "INSERT OR IGNORE INTO prompts (prompt_id, content_hash, text, created_at) "
      "VALUES (?1, ?2, ?3, ?4)");
  st.bind(1, stored.prompt_id)
      .bind(2, stored.content_hash)
      .bind(3, stored.text)
      .bind(4, utc_now_iso8601());
  st.run();
  tx.commit();
  return stored;
}

PromptTemplate Orchestrator::prompt(const std::string& prompt_id) {
  auto st = db_.prepare(
      "SELECT text, content_hash FROM prompts WHERE prompt_id = ?1 ORDER BY rowid DESC LIMIT 1");
  st.bind(1, prompt_id);
  if (!st.step()) throw NotFound(fmt::format("no prompt '{}'", prompt_id));
  return {prompt_id, st.text(0), st.text(1)};
}

std::vector<std::string> Orchestrator::apply_config(const ToolkitConfig& config) {
  std::vector<std::string> added;
  for (const auto& backend : config.backends) {
    auto exists = db_.prepare("SELECT 1 FROM backends WHERE backend_id = ?1");
    exists.bind(1, backend.backend_id);
    if (exists.step()) continue;
    added.push_back(register_backend(backend));
  }
  for (const auto& slot : config.prompts)
    if (slot.text) register_prompt({slot.prompt_id, *slot.text, ""});
  return added;
}

RateLimiter& Orchestrator::limiter(const BackendConfig& config) {
  std::lock_guard lock(limiters_mutex_);
  auto& slot = limiters_[config.backend_id];
  if (!slot) slot = std::make_unique<RateLimiter>(config.rate_limit);
  return *slot;
}

std::chrono::milliseconds Orchestrator::backoff(const RetryPolicy& retry, int attempt) {
  // Full jitter: uniform in [0, min(cap, base * 2^(attempt - 1))].
  const auto exp = retry.backoff_base.count() * (std::int64_t{1} << std::min(attempt - 1, 30));
  const auto ceiling = std::min<std::int64_t>(retry.backoff_cap.count(), exp);
  if (ceiling <= 0) return std::chrono::milliseconds(0);
  std::lock_guard lock(jitter_mutex_);
  return std::chrono::milliseconds(
      static_cast<std::int64_t>(jitter_() % static_cast<std::uint64_t>(ceiling + 1)));
}

Orchestrator::Outcome Orchestrator::run_http(const BackendConfig& config,
                                             const PromptTemplate& prompt,
                                             const std::string& source,
                                             const std::string& secret,
                                             const std::string& message_label) {
  const auto body = request_body(config, prompt, source).dump();
  auto headers = config.http.headers;
  if (!secret.empty()) headers[config.http.auth_header] = config.http.auth_prefix + secret;
  auto& gate = limiter(config);

  Outcome outcome;
  for (int attempt = 1; attempt <= config.retry.max_attempts; ++attempt) {
    outcome.attempts = attempt;
    gate.acquire();
    const auto response = post_json(config.endpoint, headers, body, config.http.timeout);
    std::optional<std::chrono::milliseconds> wait_hint;

    if (response.status >= 200 && response.status < 300) {
      const auto doc = json::parse(response.body, nullptr, false);
      if (doc.is_discarded()) {
        outcome.status = TranslationStatus::kInvalidResponse;
        return outcome;
      }
      const auto* in_tokens = at_pointer(doc, config.http.input_tokens_pointer);
      const auto* out_tokens = at_pointer(doc, config.http.output_tokens_pointer);
      if (in_tokens && out_tokens && in_tokens->is_number_integer() &&
          out_tokens->is_number_integer())
        outcome.usage = Usage{in_tokens->get<std::int64_t>(), out_tokens->get<std::int64_t>()};
      if (is_marker(at_pointer(doc, config.http.finish_reason_pointer),
                    config.http.refusal_markers) ||
          refusal_error(doc, config.http.refusal_markers)) {
        outcome.status = TranslationStatus::kRefused;
        spdlog::warn("backend {} refused message {}", config.backend_id, message_label);
        return outcome;
      }
      const auto* content = at_pointer(doc, config.http.content_pointer);
      if (!content || !content->is_string() || content->get<std::string>().empty()) {
        outcome.status = TranslationStatus::kInvalidResponse;
        spdlog::warn("backend {} returned no completion for message {}", config.backend_id,
                     message_label);
        return outcome;
      }
      outcome.status = TranslationStatus::kOk;
      outcome.output = content->get<std::string>();
      return outcome;
    }

    if (response.status == 429) {
      outcome.status = TranslationStatus::kRateLimited;
      wait_hint = retry_after(response);
    } else if (response.status == 0 || response.status >= 500) {
      outcome.status = TranslationStatus::kTransportError;
    } else {
      const auto doc = json::parse(response.body, nullptr, false);
      if (!doc.is_discarded() && refusal_error(doc, config.http.refusal_markers)) {
        outcome.status = TranslationStatus::kRefused;
        spdlog::warn("backend {} refused message {}", config.backend_id, message_label);
      } else {
        outcome.status = TranslationStatus::kTransportError;
        spdlog::warn("backend {} rejected message {} with HTTP {}", config.backend_id,
                     message_label, response.status);
      }
      return outcome;
    }

    spdlog::warn("backend {} message {}: attempt {}/{} failed ({})", config.backend_id,
                 message_label, attempt, config.retry.max_attempts,
                 response.status == 0 ? response.error : std::to_string(response.status));
    if (attempt < config.retry.max_attempts) {
      auto wait = backoff(config.retry, attempt);
      if (wait_hint) wait = std::max(wait, std::min(*wait_hint, config.retry.backoff_cap));
      std::this_thread::sleep_for(wait);
    }
  }
  return outcome;
}

TranslationRecord Orchestrator::translate_checked(const corpus::ChatMessage& message,
                                                  const BackendConfig& config,
                                                  const PromptTemplate& prompt) {
  TranslationRecord record;
  record.message = message.key();
  record.backend_id = config.backend_id;
  record.prompt_id = prompt.prompt_id;
  record.prompt_hash = prompt.content_hash;

  if (config.kind == BackendKind::kMockDictionary) {
    limiter(config).acquire();
    auto output = mock_translate(config.dictionary, message.text);
    record.attempt_count = 1;
    if (output.empty()) {
      record.status = TranslationStatus::kInvalidResponse;
    } else {
      record.usage = Usage{count_words(prompt.text) + count_words(message.text),
                           count_words(output)};
      record.output_text = std::move(output);
      record.status = TranslationStatus::kOk;
    }
    return persist(std::move(record));
  }

  const auto secret = require_secret(config);
  const auto start = Clock::now();
  auto outcome = run_http(config, prompt, message.text, secret, record.message.to_string());
  record.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
  record.status = outcome.status;
  record.output_text = std::move(outcome.output);
  record.usage = outcome.usage;
  record.attempt_count = outcome.attempts;
  return persist(std::move(record));
}

TranslationRecord Orchestrator::persist(TranslationRecord record) {
  record.created_at = utc_now_iso8601();
  Database::Transaction tx(db_);
  auto st = db_.prepare(fmt::format(
      "INSERT INTO translations ({}) VALUES (NULL, ?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, "
      "?11, ?12)",
      kRecordColumns));
  st.bind(1, record.message.channel_id)
      .bind(2, record.message.message_id)
      .bind(3, record.backend_id)
      .bind(4, record.prompt_id)
      .bind(5, record.prompt_hash)
      .bind(6, record.output_text)
      .bind(7, to_string(record.status));
  if (record.usage) {
    st.bind(8, record.usage->input_tokens).bind(9, record.usage->output_tokens);
  } else {
    st.bind_null(8).bind_null(9);
  }
  st.bind(10, record.latency_ms).bind(11, record.attempt_count).bind(12, record.created_at);
  st.run();
  record.record_id = db_.last_insert_rowid();
  tx.commit();
  return record;
}

TranslationRecord Orchestrator::translate(const corpus::MessageKey& message,
                                          const std::string& backend_id,
                                          const std::string& prompt_id) {
  const auto stored = corpus_.find(message);
  if (!stored) throw NotFound("no stored message " + message.to_string());
  const auto config = backend(backend_id);
  const auto p = prompt(prompt_id);
  return translate_checked(*stored, config, p);
}

BatchReport Orchestrator::translate_batch(const std::vector<corpus::MessageKey>& messages,
                                          const std::vector<std::string>& backend_ids,
                                          const std::string& prompt_id,
                                          std::size_t max_in_flight) {
  if (max_in_flight < 1) throw InvalidInput("max_in_flight must be at least 1");
  BatchReport report;
  const auto p = prompt(prompt_id);
  std::vector<BackendConfig> configs;
  for (const auto& id : backend_ids) {
    configs.push_back(backend(id));
    require_secret(configs.back());
    report.per_backend[id];
  }
  std::vector<corpus::ChatMessage> sources;
  for (const auto& key : messages) {
    auto m = corpus_.find(key);
    if (!m) throw NotFound("no stored message " + key.to_string());
    sources.push_back(std::move(*m));
  }

  const std::size_t tasks = sources.size() * configs.size();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex report_mutex;
  std::exception_ptr failure;
  const auto worker = [&] {
    while (!abort) {
      const auto i = next++;
      if (i >= tasks) return;
      const auto& source = sources[i / configs.size()];
      const auto& config = configs[i % configs.size()];
      try {
        const auto record = translate_checked(source, config, p);
        std::lock_guard lock(report_mutex);
        auto& counts = report.per_backend[config.backend_id];
        if (record.status == TranslationStatus::kOk) {
          ++counts.ok;
        } else if (record.status == TranslationStatus::kRefused) {
          ++counts.refused;
        } else {
          ++counts.failed;
        }
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
  };
  const auto n_threads = std::min(max_in_flight, tasks);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return report;
}

TranslationRecord Orchestrator::record(std::int64_t record_id) {
  auto st = db_.prepare(
      fmt::format("SELECT {} FROM translations WHERE record_id = ?1", kRecordColumns));
  st.bind(1, record_id);
  if (!st.step()) throw NotFound(fmt::format("no translation record {}", record_id));
  return read_record(st);
}

std::vector<TranslationRecord> Orchestrator::records(
    const std::optional<corpus::MessageKey>& message,
    const std::optional<std::string>& backend_id) {
  auto st = db_.prepare(fmt::format(
      "SELECT {} FROM translations WHERE (?1 IS NULL OR (channel_id = ?1 AND message_id = ?2)) "
      "AND (?3 IS NULL OR backend_id = ?3) ORDER BY record_id",
      kRecordColumns));
  if (message) {
    st.bind(1, message->channel_id).bind(2, message->message_id);
  } else {
    st.bind_null(1).bind_null(2);
  }
  st.bind(3, backend_id);
  std::vector<TranslationRecord> out;
  while (st.step()) out.push_back(read_record(st));
  return out;
}

BestPick Orchestrator::record_best_pick(const corpus::MessageKey& message,
                                        std::int64_t record_id, const std::string& rater_id) {
  if (rater_id.empty()) throw InvalidInput("rater_id must not be empty");
  Database::Transaction tx(db_);
  const auto chosen = record(record_id);
  if (chosen.status != TranslationStatus::kOk)
    throw InvalidPick(fmt::format("record {} has status {}", record_id, to_string(chosen.status)));
  if (chosen.message != message)
    throw InvalidPick(fmt::format("record {} translates {}, not {}", record_id,
                                  chosen.message.to_string(), message.to_string()));
  BestPick pick{message, record_id, rater_id, utc_now_iso8601()};
  auto st = db_.prepare(
      "INSERT OR REPLACE INTO best_picks (channel_id, message_id, rater_id, record_id, "
      "picked_at) VALUES (?1, ?2, ?3, ?4, ?5)");
  st.bind(1, message.channel_id)
      .bind(2, message.message_id)
      .bind(3, rater_id)
      .bind(4, record_id)
      .bind(5, pick.picked_at);
  st.run();
  tx.commit();
  return pick;
}

std::optional<BestPick> Orchestrator::best_pick(const corpus::MessageKey& message,
                                                const std::string& rater_id) {
  auto st = db_.prepare(
      "SELECT channel_id, message_id, record_id, rater_id, picked_at FROM best_picks "
      "WHERE channel_id = ?1 AND message_id = ?2 AND rater_id = ?3");
  st.bind(1, message.channel_id).bind(2, message.message_id).bind(3, rater_id);
  if (!st.step()) return std::nullopt;
  return read_pick(st);
}

std::vector<BestPick> Orchestrator::best_picks(const std::optional<std::string>& rater_id) {
  auto st = db_.prepare(
      "SELECT channel_id, message_id, record_id, rater_id, picked_at FROM best_picks "
      "WHERE ?1 IS NULL OR rater_id = ?1 ORDER BY channel_id, message_id, rater_id");
  st.bind(1, rater_id);
  std::vector<BestPick> out;
  while (st.step()) out.push_back(read_pick(st));
  return out;
}

std::map<std::string, std::size_t> Orchestrator::pick_tally(
    const std::optional<std::string>& rater_id) {
  auto st = db_.prepare(
      "SELECT t.backend_id, count(*) FROM best_picks p JOIN translations t "
      "ON t.record_id = p.record_id WHERE ?1 IS NULL OR p.rater_id = ?1 "
      "GROUP BY t.backend_id");
  st.bind(1, rater_id);
  std::map<std::string, std::size_t> out;
  while (st.step()) out[st.text(0)] = static_cast<std::size_t>(st.int64(1));
  return out;
}

std::optional<std::string> best_backend(const std::map<std::string, std::size_t>& tally) {
  std::optional<std::string> best;
  std::size_t most = 0;
  for (const auto& [id, n] : tally)
    if (n > most) {
      most = n;
      best = id;
    }
  return best;
}

}  // namespace mtkit::orchestrator
