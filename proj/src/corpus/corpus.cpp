#include "mtkit/corpus/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mtkit/common/errors.hpp"

namespace mtkit::corpus {
namespace {

using nlohmann::json;

constexpr std::string_view kOuterWhitespace = " \t\r\n\v\f";

struct Candidate {
  std::int64_t message_id = 0;
  std::int64_t unix_time = 0;
  std::string text;
  bool has_media = false;
  bool service = false;
  std::map<std::string, std::string> meta;
};

std::string format_utc(std::int64_t unix_time) {
  const auto t = static_cast<std::time_t>(unix_time);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool parse_digits(std::string_view s, std::size_t pos, std::size_t len,
                  int& out) {
  if (pos + len > s.size()) return false;
  const auto* first = s.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc() && ptr == first + len;
}

// "YYYY-MM-DDTHH:MM:SS" with optional fraction and "Z" or "+HH:MM". A
// missing zone is read as UTC.
std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  std::tm tm{};
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' ||
      (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
    return std::nullopt;
  if (!parse_digits(s, 0, 4, year) || !parse_digits(s, 5, 2, month) ||
      !parse_digits(s, 8, 2, day) || !parse_digits(s, 11, 2, hour) ||
      !parse_digits(s, 14, 2, minute) || !parse_digits(s, 17, 2, second))
    return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      // UTC
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() &&
               s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!parse_digits(s, pos + 1, 2, oh) || !parse_digits(s, pos + 4, 2, om))
        return std::nullopt;
      offset = (oh * 60 + om) * 60;
      if (s[pos] == '-') offset = -offset;
    } else {
      return std::nullopt;
    }
  }
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  return static_cast<std::int64_t>(timegm(&tm)) - offset;
}

std::string meta_value(const json& value) {
  return value.is_string() ? value.get<std::string>() : value.dump();
}

// Telegram stores text either as a plain string or as an array mixing
// strings and entity objects that carry their own "text".
std::optional<std::string> export_text(const json& text) {
  if (text.is_string()) return text.get<std::string>();
  if (!text.is_array()) return std::nullopt;
  std::string out;
  for (const auto& part : text) {
    if (part.is_string()) {
      out += part.get<std::string>();
    } else if (part.is_object() && part.contains("text") &&
               part["text"].is_string()) {
      out += part["text"].get<std::string>();
    } else {
      return std::nullopt;
    }
  }
  return out;
}

std::optional<std::int64_t> json_int(const json& value) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size()) return out;
  }
  return std::nullopt;
}

std::optional<std::int64_t> json_time(const json& value) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_string()) return parse_iso8601(value.get<std::string>());
  return std::nullopt;
}

std::vector<Candidate> parse_telegram(const json& doc,
                                      std::vector<std::string>& errors) {
  std::vector<Candidate> out;
  for (const auto& m : doc["messages"]) {
    if (!m.is_object()) {
      errors.push_back("message entry is not an object");
      continue;
    }
    const auto id = json_int(m.value("id", json()));
    if (!id || *id <= 0) {
      errors.push_back("message without a positive id");
      continue;
    }
    Candidate c;
    c.message_id = *id;
    c.service = m.value("type", std::string("message")) == "service";
    std::optional<std::int64_t> when;
    if (m.contains("date_unixtime")) when = json_int(m["date_unixtime"]);
    if (!when && m.contains("date")) when = json_time(m["date"]);
    if (!when && !c.service) {
      errors.push_back(fmt::format("message {}: missing or invalid date", *id));
      continue;
    }
    c.unix_time = when.value_or(0);
    if (m.contains("text")) {
      const auto text = export_text(m["text"]);
      if (!text) {
        errors.push_back(fmt::format("message {}: unreadable text field", *id));
        continue;
      }
      c.text = *text;
    }
    c.has_media = m.contains("media_type") || m.contains("photo") ||
                  m.contains("file");
    for (const auto& [field, value] : m.items())
      if (field != "text") c.meta.emplace(field, meta_value(value));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Candidate> parse_jsonl(std::string_view data,
                                   const std::string& channel_id,
                                   std::vector<std::string>& errors) {
  std::vector<Candidate> out;
  std::size_t line_start = 0;
  std::size_t line_no = 0;
  while (line_start < data.size()) {
    auto line_end = data.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = data.size();
    const auto line = data.substr(line_start, line_end - line_start);
    ++line_no;
    if (line.find_first_not_of(kOuterWhitespace) != std::string_view::npos) {
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("line {}: {}", line_no, e.what()),
                         line_start + (e.byte > 0 ? e.byte - 1 : 0));
      }
      if (!obj.is_object())
        throw ParseError(fmt::format("line {}: expected an object", line_no),
                         line_start);
      const auto id = json_int(obj.value("message_id", json()));
      const auto when = json_time(obj.value("date", json()));
      const auto channel =
          obj.contains("channel_id") ? meta_value(obj["channel_id"]) : channel_id;
      if (!id || *id <= 0) {
        errors.push_back(fmt::format("line {}: missing positive message_id", line_no));
      } else if (!when) {
        errors.push_back(fmt::format("line {}: missing or invalid date", line_no));
      } else if (channel != channel_id) {
        errors.push_back(fmt::format("line {}: channel '{}' does not match '{}'",
                                     line_no, channel, channel_id));
      } else if (obj.contains("text") && !obj["text"].is_string()) {
        errors.push_back(fmt::format("line {}: text is not a string", line_no));
      } else {
        Candidate c;
        c.message_id = *id;
        c.unix_time = *when;
        c.text = obj.value("text", std::string());
        c.has_media = obj.value("has_media", false);
        for (const auto& [field, value] : obj.items())
          if (field != "text") c.meta.emplace(field, meta_value(value));
        out.push_back(std::move(c));
      }
    }
    line_start = line_end + 1;
  }
  return out;
}

bool looks_like_jsonl(std::string_view data) {
  const auto end = data.find('\n');
  const auto first = data.substr(0, end);
  if (first.find_first_not_of(kOuterWhitespace) == std::string_view::npos)
    return false;
  const auto obj = json::parse(first, nullptr, false);
  return obj.is_object() && obj.contains("message_id");
}

ChatMessage read_message(Statement& st) {
  ChatMessage m;
  m.channel_id = st.text(0);
  m.message_id = st.int64(1);
  m.timestamp = st.text(2);
  m.unix_time = st.int64(3);
  m.text = st.text(4);
  m.has_media = st.int64(5) != 0;
  m.outer_ws_trimmed = st.int64(6) != 0;
  const auto meta = json::parse(st.text(7));
  for (const auto& [k, v] : meta.items()) m.source_meta.emplace(k, v.get<std::string>());
  return m;
}

constexpr std::string_view kMessageColumns =
    "channel_id, message_id, timestamp, unix_time, text, has_media, "
    "outer_ws_trimmed, source_meta";

}  // namespace

std::string MessageKey::to_string() const {
  return fmt::format("{}:{}", channel_id, message_id);
}

MessageKey MessageKey::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0)
    throw InvalidInput(fmt::format("message key '{}' is not <channel>:<id>", text));
  MessageKey key{std::string(text.substr(0, colon)), 0};
  const auto digits = text.substr(colon + 1);
  const auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), key.message_id);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || key.message_id <= 0)
    throw InvalidInput(fmt::format("message key '{}' has no positive id", text));
  return key;
}

std::string_view to_string(GroundTruthKind kind) {
  return kind == GroundTruthKind::kMessage ? "message" : "vocabulary";
}

std::string GroundTruthEntry::entry_key() const {
  if (kind == GroundTruthKind::kMessage) {
    if (!message) throw InvalidInput("message ground truth without a message key");
    return "msg:" + message->to_string();
  }
  return "lit:" + source_text;
}

std::string_view to_string(Assignment assignment) {
  return assignment == Assignment::kTest ? "test" : "train_val";
}

std::vector<MessageKey> DatasetSplit::keys(Assignment which) const {
  std::vector<MessageKey> out;
  for (const auto& [key, a] : assignments)
    if (a == which) out.push_back(key);
  return out;
}

DatasetSplit split_corpus(const std::vector<ChatMessage>& messages,
                          std::size_t test_n, std::string name) {
  if (test_n >= messages.size())
    throw InvalidSplit(fmt::format("test_n {} must be below the {} selected messages",
                                   test_n, messages.size()));
  std::vector<MessageKey> keys;
  keys.reserve(messages.size());
  for (const auto& m : messages) {
    if (m.channel_id != messages.front().channel_id)
      throw InvalidSplit("a chronological split needs messages from one channel");
    keys.push_back(m.key());
  }
  std::sort(keys.begin(), keys.end());
  if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
    throw InvalidSplit("duplicate message in split input");

  DatasetSplit split;
  split.name = std::move(name);
  const auto first_test = keys.size() - test_n;
  for (std::size_t i = 0; i < keys.size(); ++i)
    split.assignments.emplace(keys[i],
                              i < first_test ? Assignment::kTrainVal : Assignment::kTest);
  return split;
}

std::mutex& Corpus::channel_lock(const std::string& channel_id) {
  std::lock_guard guard(locks_guard_);
  return channel_locks_[channel_id];
}

ImportReport Corpus::import_file(const std::filesystem::path& path,
                                 const std::string& channel_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return import_export(in, channel_id);
}

ImportReport Corpus::import_export(std::istream& in, const std::string& channel_id) {
  if (channel_id.empty()) throw InvalidInput("channel id must not be empty");
  const std::string data{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read failure on import stream");

  ImportReport report;
  std::vector<Candidate> candidates;
  if (looks_like_jsonl(data)) {
    candidates = parse_jsonl(data, channel_id, report.errors);
  } else {
    json doc;
    try {
      doc = json::parse(data);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!doc.is_object() || !doc.contains("messages") || !doc["messages"].is_array())
      throw ParseError("export document has no \"messages\" array", 0);
    candidates = parse_telegram(doc, report.errors);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.message_id < b.message_id;
                   });

  std::lock_guard channel_guard(channel_lock(channel_id));
  Database::Transaction tx(db_);
  auto lookup = db_.prepare(
      "SELECT text FROM messages WHERE channel_id = ?1 AND message_id = ?2");
  auto previous = db_.prepare(
      "SELECT message_id, unix_time FROM messages WHERE channel_id = ?1 "
      "AND message_id < ?2 ORDER BY message_id DESC LIMIT 1");
  auto next = db_.prepare(
      "SELECT message_id, unix_time FROM messages WHERE channel_id = ?1 "
      "AND message_id > ?2 ORDER BY message_id ASC LIMIT 1");
  auto insert = db_.prepare(fmt::format(
      "INSERT INTO messages ({}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
      kMessageColumns));

  for (auto& c : candidates) {
    const auto first = c.text.find_first_not_of(kOuterWhitespace);
    if (c.service || first == std::string::npos) {
      ++report.skipped;
      continue;
    }
    const auto last = c.text.find_last_not_of(kOuterWhitespace);
    const bool trimmed = first != 0 || last + 1 != c.text.size();
    std::string text = c.text.substr(first, last - first + 1);

    lookup.reset();
    lookup.bind(1, channel_id).bind(2, c.message_id);
    if (lookup.step()) {
      if (lookup.text(0) != text)
        throw ConflictError(fmt::format(
            "message {}:{} already stored with different text", channel_id,
            c.message_id));
      ++report.skipped;
      continue;
    }

    previous.reset();
    previous.bind(1, channel_id).bind(2, c.message_id);
    if (previous.step() && previous.int64(1) > c.unix_time) {
      report.errors.push_back(fmt::format(
          "message {}: timestamp precedes that of earlier message {}",
          c.message_id, previous.int64(0)));
      continue;
    }
    next.reset();
    next.bind(1, channel_id).bind(2, c.message_id);
    if (next.step() && next.int64(1) < c.unix_time) {
      report.errors.push_back(fmt::format(
          "message {}: timestamp follows that of later message {}",
          c.message_id, next.int64(0)));
      continue;
    }

    insert.reset();
    insert.bind(1, channel_id)
        .bind(2, c.message_id)
        .bind(3, format_utc(c.unix_time))
        .bind(4, c.unix_time)
        .bind(5, text)
        .bind(6, c.has_media ? 1 : 0)
        .bind(7, trimmed ? 1 : 0)
        .bind(8, json(c.meta).dump());
    insert.run();
    ++report.imported;
  }
  tx.commit();
  return report;
}

std::vector<ChatMessage> Corpus::select_chronological(const std::string& channel_id,
                                                      std::size_t n) {
  const auto available = count(channel_id);
  if (available < n) throw ShortfallError(n, available);
  auto st = db_.prepare(fmt::format(
      "SELECT {} FROM messages WHERE channel_id = ?1 ORDER BY message_id LIMIT ?2",
      kMessageColumns));
  st.bind(1, channel_id).bind(2, static_cast<std::int64_t>(n));
  std::vector<ChatMessage> out;
  while (st.step()) out.push_back(read_message(st));
  return out;
}

std::optional<ChatMessage> Corpus::find(const MessageKey& key) {
  auto st = db_.prepare(fmt::format(
      "SELECT {} FROM messages WHERE channel_id = ?1 AND message_id = ?2",
      kMessageColumns));
  st.bind(1, key.channel_id).bind(2, key.message_id);
  if (!st.step()) return std::nullopt;
  return read_message(st);
}

std::size_t Corpus::count(const std::string& channel_id) {
  auto st = db_.prepare("SELECT count(*) FROM messages WHERE channel_id = ?1");
  st.bind(1, channel_id);
  st.step();
  return static_cast<std::size_t>(st.int64(0));
}

std::vector<std::string> Corpus::channels() {
  auto st = db_.prepare("SELECT DISTINCT channel_id FROM messages ORDER BY channel_id");
  std::vector<std::string> out;
  while (st.step()) out.push_back(st.text(0));
  return out;
}

void Corpus::save_split(const DatasetSplit& split) {
  if (split.name.empty()) throw InvalidInput("split name must not be empty");
  Database::Transaction tx(db_);
  auto exists = db_.prepare("SELECT 1 FROM splits WHERE name = ?1 LIMIT 1");
  exists.bind(1, split.name);
  if (exists.step())
    throw ConflictError(fmt::format("split '{}' already exists", split.name));
  auto insert = db_.prepare(
      "INSERT INTO splits (name, channel_id, message_id, assignment, policy, seed) "
      "VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
  for (const auto& [key, assignment] : split.assignments) {
    if (!find(key)) throw NotFound("split references unknown message " + key.to_string());
    insert.reset();
    insert.bind(1, split.name)
        .bind(2, key.channel_id)
        .bind(3, key.message_id)
        .bind(4, to_string(assignment))
        .bind(5, split.policy)
        .bind(6, split.created_with_seed);
    insert.run();
  }
  tx.commit();
}

DatasetSplit Corpus::load_split(const std::string& name) {
  auto st = db_.prepare(
      "SELECT channel_id, message_id, assignment, policy, seed FROM splits "
      "WHERE name = ?1");
  st.bind(1, name);
  DatasetSplit split;
  split.name = name;
  while (st.step()) {
    split.assignments.emplace(
        MessageKey{st.text(0), st.int64(1)},
        st.text(2) == "test" ? Assignment::kTest : Assignment::kTrainVal);
    split.policy = st.text(3);
    split.created_with_seed = st.optional_int64(4);
  }
  if (split.assignments.empty()) throw NotFound(fmt::format("no split named '{}'", name));
  return split;
}

std::string Corpus::add_ground_truth(const GroundTruthEntry& entry) {
  if (entry.target_text.empty()) throw InvalidInput("ground truth target must not be empty");
  if (entry.translator_id.empty()) throw InvalidInput("translator id must not be empty");
  GroundTruthEntry stored = entry;
  if (entry.kind == GroundTruthKind::kMessage) {
    if (!entry.message) throw InvalidInput("message ground truth without a message key");
    const auto message = find(*entry.message);
    if (!message)
      throw NotFound("no stored message " + entry.message->to_string());
    if (!entry.source_text.empty() && entry.source_text != message->text)
      throw InvalidInput("source text differs from stored message " +
                         entry.message->to_string());
    stored.source_text = message->text;
  } else {
    if (entry.message) throw InvalidInput("vocabulary entries carry no message reference");
    if (entry.source_text.empty()) throw InvalidInput("vocabulary source must not be empty");
  }

  const auto key = stored.entry_key();
  Database::Transaction tx(db_);
  auto insert = db_.prepare(
      "INSERT INTO ground_truth (entry_key, kind, channel_id, message_id, "
      "source_text, target_text, translator_id) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)");
  insert.bind(1, key).bind(2, to_string(stored.kind));
  if (stored.message) {
    insert.bind(3, stored.message->channel_id).bind(4, stored.message->message_id);
  } else {
    insert.bind_null(3).bind_null(4);
  }
  insert.bind(5, stored.source_text).bind(6, stored.target_text).bind(7, stored.translator_id);
  try {
    insert.run();
  } catch (const std::exception& e) {
    if (is_constraint_violation(e))
      throw ConflictError(fmt::format("ground truth '{}' already exists for translator '{}'",
                                      key, stored.translator_id));
    throw;
  }
  tx.commit();
  return key;
}

namespace {

GroundTruthEntry read_entry(Statement& st) {
  GroundTruthEntry e;
  e.kind = st.text(0) == "message" ? GroundTruthKind::kMessage
                                   : GroundTruthKind::kVocabulary;
  if (!st.is_null(2)) e.message = MessageKey{st.text(1), st.int64(2)};
  e.source_text = st.text(3);
  e.target_text = st.text(4);
  e.translator_id = st.text(5);
  return e;
}

constexpr std::string_view kEntryColumns =
    "kind, channel_id, message_id, source_text, target_text, translator_id";

}  // namespace

std::vector<GroundTruthEntry> Corpus::ground_truth(
    const std::optional<std::string>& translator_id) {
  auto st = db_.prepare(fmt::format(
      "SELECT {} FROM ground_truth WHERE ?1 IS NULL OR translator_id = ?1 ORDER BY id",
      kEntryColumns));
  st.bind(1, translator_id);
  std::vector<GroundTruthEntry> out;
  while (st.step()) out.push_back(read_entry(st));
  return out;
}

std::optional<GroundTruthEntry> Corpus::find_ground_truth(
    const std::string& entry_key, const std::string& translator_id) {
  auto st = db_.prepare(fmt::format(
      "SELECT {} FROM ground_truth WHERE entry_key = ?1 AND translator_id = ?2",
      kEntryColumns));
  st.bind(1, entry_key).bind(2, translator_id);
  if (!st.step()) return std::nullopt;
  return read_entry(st);
}

}  // namespace mtkit::corpus
