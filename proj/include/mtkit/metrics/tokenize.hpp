#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mtkit::metrics {

enum class Casing { kPreserved, kFolded };

struct TokenSequence {
  std::vector<std::string> tokens;
  Casing casing = Casing::kPreserved;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  bool operator==(const TokenSequence&) const = default;
};

// Byte range [begin, end) inside a UTF-8 string.
struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// NFC-normalises, keeps URL spans and emoji as atomic tokens, splits the
// rest on whitespace and detaches leading/trailing punctuation one code
// point per token. Interior punctuation ("DDoS-attacks") stays attached.
TokenSequence tokenize(std::string_view text,
                       Casing casing = Casing::kPreserved);

// Wraps already-split tokens (whitespace tokenisation, used by the metric
// oracles and tests). No normalisation is applied.
TokenSequence from_words(std::string_view text);

// URL spans: either scheme-based (https://...) or a bare domain such as
// "strana.today" or "We-are-not-alone.ru/path". Trailing sentence
// punctuation is excluded from the span.
std::vector<TextSpan> find_urls(std::string_view text);

// Emoji grapheme clusters (pictographs, flags, keycaps, ZWJ sequences) in
// order of appearance.
std::vector<std::string> find_emoji(std::string_view text);

// Comparison key for a URL: host (and scheme) lower-cased, path untouched.
std::string url_key(std::string_view url);

// Emoji with variation selectors removed, so "⚡" and "⚡️" compare equal.
std::string emoji_key(std::string_view emoji);

std::string nfc(std::string_view text);

std::string fold_case(std::string_view text);

}  // namespace mtkit::metrics
