#include "mtkit/finetune/finetune.hpp"

#include <array>
#include <cmath>
#include <iterator>
#include <numeric>
#include <set>
#include <string_view>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "mtkit/common/errors.hpp"
#include "mtkit/common/random.hpp"

namespace mtkit::finetune {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kRoles[] = {"system", "user", "assistant"};

std::string line_of(const FineTuneRecord& r) {
  ordered_json messages = ordered_json::array();
  const std::string* texts[] = {&r.system_text, &r.user_text, &r.assistant_text};
  for (int i = 0; i < 3; ++i) {
    ordered_json m;
    m["role"] = kRoles[i];
    m["content"] = *texts[i];
    messages.push_back(std::move(m));
  }
  ordered_json obj;
  obj["messages"] = std::move(messages);
  return obj.dump() + "\n";
}

struct Line {
  std::size_t number = 0;
  std::size_t offset = 0;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view data) {
  std::vector<Line> out;
  std::size_t start = 0;
  std::size_t number = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    out.push_back({++number, start, data.substr(start, end - start)});
    start = end + 1;
  }
  return out;
}

std::string read_all(std::istream& in) {
  if (!in) throw IoError("fine-tune stream is not readable");
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read failure on fine-tune stream");
  return data;
}

// The three contents, or nullopt when the role structure is wrong.
std::optional<std::array<std::string, 3>> roles_of(const json& obj) {
  if (!obj.is_object() || obj.size() != 1 || !obj.contains("messages")) return std::nullopt;
  const auto& messages = obj["messages"];
  if (!messages.is_array() || messages.size() != 3) return std::nullopt;
  std::array<std::string, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& m = messages[i];
    if (!m.is_object() || m.size() != 2 || !m.contains("role") || !m.contains("content") ||
        m["role"] != kRoles[i] || !m["content"].is_string())
      return std::nullopt;
    out[i] = m["content"].get<std::string>();
  }
  return out;
}

}  // namespace

std::vector<FineTuneRecord> build_finetune_dataset(
    std::span<const corpus::GroundTruthEntry> ground_truth,
    const PromptTemplate& prompt,
    const std::map<corpus::MessageKey, std::int64_t>* best_picks) {
  if (ground_truth.empty())
    throw EmptyDataset("no ground-truth entries to build a fine-tuning set from");
  if (prompt.text.empty()) throw InvalidInput("prompt text must not be empty");
  std::vector<FineTuneRecord> out;
  out.reserve(ground_truth.size());
  for (const auto& entry : ground_truth) {
    if (entry.source_text.empty() || entry.target_text.empty())
      throw InvalidInput("ground-truth entry with empty text: " + entry.entry_key());
    FineTuneRecord r;
    r.system_text = prompt.text;
    r.user_text = entry.source_text;
    r.assistant_text = entry.target_text;
    r.origin = entry.kind == corpus::GroundTruthKind::kVocabulary ? Origin::kVocabulary
                                                                  : Origin::kMessage;
    if (best_picks && entry.message) {
      if (const auto it = best_picks->find(*entry.message); it != best_picks->end())
        r.picked_record = it->second;
    }
    out.push_back(std::move(r));
  }
  return out;
}

FineTuneSplit split_finetune(std::span<const FineTuneRecord> records,
                             double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidInput(fmt::format("train fraction {} is outside (0, 1)", train_fraction));
  const std::size_t n = records.size();
  // The epsilon keeps 125 * 0.2 at 25 despite 0.2 being inexact.
  const auto n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * (1.0 - train_fraction) + 1e-9));
  const std::size_t n_train = n - n_val;

  std::vector<std::size_t> messages;
  std::size_t vocabulary = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].origin == Origin::kVocabulary) {
      ++vocabulary;
    } else {
      messages.push_back(i);
    }
  }
  if (vocabulary > n_train)
    throw InfeasibleSplit(fmt::format(
        "{} vocabulary records exceed the {} training slots", vocabulary, n_train));

  SeededRng rng(seed);
  rng.shuffle(std::span(messages));
  std::vector<bool> in_validation(n, false);
  for (std::size_t i = 0; i < n_val; ++i) in_validation[messages[i]] = true;

  FineTuneSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i)
    (in_validation[i] ? split.validation : split.train).push_back(records[i]);
  return split;
}

std::size_t serialize_jsonl(std::span<const FineTuneRecord> records, std::ostream& out) {
  std::size_t written = 0;
  for (const auto& r : records) {
    if (r.system_text.empty() || r.user_text.empty() || r.assistant_text.empty())
      throw InvalidInput("fine-tune record with empty text");
    const auto line = line_of(r);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out) throw IoError("write failed after " + std::to_string(written) + " bytes", written);
    written += line.size();
  }
  out.flush();
  if (!out) throw IoError("flush failed", written);
  return written;
}

std::vector<FineTuneRecord> parse_jsonl(std::istream& in) {
  const auto data = read_all(in);
  std::vector<FineTuneRecord> out;
  for (const auto& line : split_lines(data)) {
    json obj;
    try {
      obj = json::parse(line.text);
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("line {}: {}", line.number, e.what()),
                       line.offset + (e.byte > 0 ? e.byte - 1 : 0));
    }
    const auto roles = roles_of(obj);
    if (!roles)
      throw ParseError(fmt::format("line {}: not a system/user/assistant record", line.number),
                       line.offset);
    out.push_back({(*roles)[0], (*roles)[1], (*roles)[2], Origin::kMessage, std::nullopt});
  }
  return out;
}

ValidationReport validate_jsonl(std::istream& in) {
  const auto data = read_all(in);
  ValidationReport report;
  std::optional<std::string> system;
  std::unordered_map<std::string, std::string> assistant_by_user;
  for (const auto& line : split_lines(data)) {
    ++report.lines;
    const auto obj = json::parse(line.text, nullptr, false);
    if (obj.is_discarded()) {
      report.parse_errors.push_back(line.number);
      continue;
    }
    const auto roles = roles_of(obj);
    if (!roles) {
      report.role_errors.push_back(line.number);
      continue;
    }
    const auto& [sys, user, assistant] = *roles;
    if (sys.empty() || user.empty() || assistant.empty())
      report.empty_content.push_back(line.number);
    if (!system) {
      system = sys;
    } else if (*system != sys) {
      report.inconsistent_system_prompts.push_back(line.number);
    }
    const auto [it, fresh] = assistant_by_user.emplace(user, assistant);
    if (!fresh && it->second != assistant) report.duplicate_user_texts.push_back(line.number);
  }
  return report;
}

std::string render_report(const ValidationReport& r) {
  const auto list = [](const std::vector<std::size_t>& v) {
    return v.empty() ? std::string("0") : fmt::format("{} (lines {})", v.size(), fmt::join(v, ", "));
  };
  return fmt::format(
      "lines: {}\nparse_errors: {}\nrole_errors: {}\nempty_content: {}\n"
      "duplicate_user_texts: {}\ninconsistent_system_prompts: {}\n",
      r.lines, list(r.parse_errors), list(r.role_errors), list(r.empty_content),
      list(r.duplicate_user_texts), list(r.inconsistent_system_prompts));
}

std::int64_t record_job(Database& db, const FineTuneJob& job) {
  if (job.base_model.empty()) throw InvalidInput("base model must not be empty");
  if (job.file_digest.empty()) throw InvalidInput("file digest must not be empty");
  Database::Transaction tx(db);
  auto st = db.prepare(
      "INSERT INTO finetune_jobs (base_model, file_digest, vendor_job_id, result_model, "
      "params, created_at) VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
  st.bind(1, job.base_model)
      .bind(2, job.file_digest)
      .bind(3, job.vendor_job_id)
      .bind(4, job.result_model)
      .bind(5, json(job.params).dump())
      .bind(6, job.created_at.empty() ? utc_now_iso8601() : job.created_at);
  st.run();
  const auto row = db.last_insert_rowid();
  tx.commit();
  return row;
}

std::vector<FineTuneJob> list_jobs(Database& db) {
  auto st = db.prepare(
      "SELECT job_row, base_model, file_digest, vendor_job_id, result_model, params, "
      "created_at FROM finetune_jobs ORDER BY job_row");
  std::vector<FineTuneJob> out;
  while (st.step()) {
    FineTuneJob job;
    job.job_row = st.int64(0);
    job.base_model = st.text(1);
    job.file_digest = st.text(2);
    job.vendor_job_id = st.optional_text(3);
    job.result_model = st.optional_text(4);
    const auto params = json::parse(st.text(5));
    job.params = params.get<std::map<std::string, std::string>>();
    job.created_at = st.text(6);
    out.push_back(std::move(job));
  }
  return out;
}

}  // namespace mtkit::finetune
