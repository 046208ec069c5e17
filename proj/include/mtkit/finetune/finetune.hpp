#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mtkit/common/prompt.hpp"
#include "mtkit/common/store.hpp"
#include "mtkit/corpus/corpus.hpp"

namespace mtkit::finetune {

enum class Origin { kMessage, kVocabulary };

struct FineTuneRecord {
  std::string system_text;
  std::string user_text;
  std::string assistant_text;
  Origin origin = Origin::kMessage;
  // Translation record the expert picked for this message, when known.
  // Not part of the serialized file.
  std::optional<std::int64_t> picked_record;

  bool operator==(const FineTuneRecord&) const = default;
};

struct FineTuneSplit {
  std::vector<FineTuneRecord> train;
  std::vector<FineTuneRecord> validation;
  std::uint64_t seed = 0;
};

// One record per ground-truth entry, in input order: the prompt as system
// text, the Russian source as user text and the expert translation as the
// assistant text. best_picks maps message keys to picked record ids.
// Throws EmptyDataset for an empty input and InvalidInput for an entry
// with an empty side.
std::vector<FineTuneRecord> build_finetune_dataset(
    std::span<const corpus::GroundTruthEntry> ground_truth,
    const PromptTemplate& prompt,
    const std::map<corpus::MessageKey, std::int64_t>* best_picks = nullptr);

// Validation takes floor(N * (1 - train_fraction)) message records chosen
// by a seeded shuffle; vocabulary records always stay in train. Both lists
// keep input order. Throws InfeasibleSplit when the vocabulary alone does
// not fit in train.
FineTuneSplit split_finetune(std::span<const FineTuneRecord> records,
                             double train_fraction, std::uint64_t seed);

// Writes one {"messages":[system, user, assistant]} object per line, each
// line terminated by "\n". Returns the byte count. On a sink failure throws
// IoError carrying the bytes of the complete lines written before it.
std::size_t serialize_jsonl(std::span<const FineTuneRecord> records,
                            std::ostream& out);

// Strict reader for files in the serialize_jsonl format. Throws ParseError
// naming the byte offset of the offending line.
std::vector<FineTuneRecord> parse_jsonl(std::istream& in);

// Line numbers are 1-based.
struct ValidationReport {
  std::size_t lines = 0;
  std::vector<std::size_t> parse_errors;
  // Missing, extra or out-of-order roles.
  std::vector<std::size_t> role_errors;
  std::vector<std::size_t> empty_content;
  // Lines repeating the user text of an earlier line with a different
  // assistant text.
  std::vector<std::size_t> duplicate_user_texts;
  // Lines whose system text differs from the first record's.
  std::vector<std::size_t> inconsistent_system_prompts;

  bool clean() const {
    return parse_errors.empty() && role_errors.empty() && empty_content.empty() &&
           duplicate_user_texts.empty() && inconsistent_system_prompts.empty();
  }
};

// Findings are data; only an unreadable stream throws (IoError).
ValidationReport validate_jsonl(std::istream& in);

std::string render_report(const ValidationReport& report);

// Metadata of a fine-tuning job run on a vendor platform. The toolkit does
// not start jobs; it records what was submitted and what came back.
struct FineTuneJob {
  std::int64_t job_row = 0;
  std::string base_model;
  std::string file_digest;
  std::optional<std::string> vendor_job_id;
  std::optional<std::string> result_model;
  std::map<std::string, std::string> params;
  std::string created_at;
};

std::int64_t record_job(Database& db, const FineTuneJob& job);
std::vector<FineTuneJob> list_jobs(Database& db);

}  // namespace mtkit::finetune
