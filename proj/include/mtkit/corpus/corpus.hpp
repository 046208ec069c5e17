#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/common/store.hpp"

namespace mtkit::corpus {

// Identity of a message. Rendered as "<channel_id>:<message_id>"; parsing
// splits on the last ':' so channel ids may themselves contain colons.
struct MessageKey {
  std::string channel_id;
  std::int64_t message_id = 0;

  std::string to_string() const;
  static MessageKey parse(std::string_view text);
  auto operator<=>(const MessageKey&) const = default;
};

struct ChatMessage {
  std::string channel_id;
  std::int64_t message_id = 0;
  // ISO 8601 UTC, "YYYY-MM-DDTHH:MM:SSZ".
  std::string timestamp;
  std::int64_t unix_time = 0;
  std::string text;
  bool has_media = false;
  // Set when leading or trailing whitespace was removed on import.
  bool outer_ws_trimmed = false;
  // Raw export fields other than the text, string values verbatim and
  // anything else as compact JSON.
  std::map<std::string, std::string> source_meta;

  MessageKey key() const { return {channel_id, message_id}; }
};

struct ImportReport {
  std::size_t imported = 0;
  std::size_t skipped = 0;
  // Messages rejected without aborting the import, one line each.
  std::vector<std::string> errors;
};

enum class GroundTruthKind { kMessage, kVocabulary };

std::string_view to_string(GroundTruthKind kind);

struct GroundTruthEntry {
  GroundTruthKind kind = GroundTruthKind::kMessage;
  // Set for kind == kMessage only.
  std::optional<MessageKey> message;
  // For message entries an empty source is filled from the stored message.
  std::string source_text;
  std::string target_text;
  std::string translator_id;

  // "msg:<channel>:<id>" or "lit:<source>".
  std::string entry_key() const;
};

enum class Assignment { kTrainVal, kTest };

std::string_view to_string(Assignment assignment);

struct DatasetSplit {
  std::string name;
  std::map<MessageKey, Assignment> assignments;
  std::string policy = "chronological";
  std::optional<std::int64_t> created_with_seed;

  std::vector<MessageKey> keys(Assignment which) const;
};

// Labels the last test_n messages (by id) as test and the rest train_val.
// Throws InvalidSplit when test_n >= messages.size(), when the messages
// span several channels or when a key repeats.
DatasetSplit split_corpus(const std::vector<ChatMessage>& messages,
                          std::size_t test_n, std::string name = "default");

// Message store on top of the shared database.
class Corpus {
 public:
  explicit Corpus(Database& db) : db_(db) {}

  // Accepts a Telegram Desktop export (object with a "messages" array) or
  // one {channel_id, message_id, date, text} object per line. The import
  // runs in one transaction: a parse error or a conflicting duplicate
  // leaves the store untouched.
  ImportReport import_export(std::istream& in, const std::string& channel_id);
  ImportReport import_file(const std::filesystem::path& path,
                           const std::string& channel_id);

  // Smallest n message ids of the channel, ascending. Throws
  // ShortfallError when fewer than n are stored.
  std::vector<ChatMessage> select_chronological(const std::string& channel_id,
                                                std::size_t n);
  std::optional<ChatMessage> find(const MessageKey& key);
  std::size_t count(const std::string& channel_id);
  std::vector<std::string> channels();

  void save_split(const DatasetSplit& split);
  // Throws NotFound for an unknown name.
  DatasetSplit load_split(const std::string& name);

  // Returns the stored entry key.
  std::string add_ground_truth(const GroundTruthEntry& entry);
  // All entries in insertion order, optionally for one translator.
  std::vector<GroundTruthEntry> ground_truth(
      const std::optional<std::string>& translator_id = std::nullopt);
  std::optional<GroundTruthEntry> find_ground_truth(
      const std::string& entry_key, const std::string& translator_id);

 private:
  std::mutex& channel_lock(const std::string& channel_id);

  Database& db_;
  std::mutex locks_guard_;
  std::map<std::string, std::mutex> channel_locks_;
};

}  // namespace mtkit::corpus
