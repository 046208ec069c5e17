#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mtkit::metrics {

enum class FindingKind { kUrlMutated, kUrlDropped, kUrlAdded, kEmojiDropped, kEmojiAdded };

std::string_view to_string(FindingKind kind);

struct IntegrityFinding {
  FindingKind kind;
  std::string detail;
};

// Multiset keyed by comparison form (see url_key / emoji_key).
using Multiset = std::map<std::string, std::size_t>;

struct IntegrityReport {
  Multiset urls_source;
  Multiset urls_translation;
  bool urls_preserved = true;
  Multiset emoji_source;
  Multiset emoji_translation;
  bool emoji_preserved = true;
  std::vector<IntegrityFinding> findings;

  bool clean() const noexcept { return urls_preserved && emoji_preserved; }
};

// Compares the URLs and emoji of a source message with its translation.
// URL hosts compare case-insensitively, paths case-sensitively. A source URL
// missing from the translation is reported as mutated when the translation
// carries an unmatched URL in its place, otherwise as dropped.
IntegrityReport check_integrity(std::string_view source,
                                std::string_view translation);

}  // namespace mtkit::metrics
