#include "mtkit/metrics/tokenize.hpp"

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cctype>
#include <memory>

#include "mtkit/common/errors.hpp"

namespace mtkit::metrics {
namespace {

struct CodePoint {
  UChar32 value;
  std::size_t begin;  // byte offset
  std::size_t end;
};

std::vector<CodePoint> decode(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto n = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < n) {
    const int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(s, i, n, c);
    if (c < 0) c = 0xFFFD;
    out.push_back({c, static_cast<std::size_t>(start),
                   static_cast<std::size_t>(i)});
  }
  return out;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }
bool is_alnum(UChar32 c) { return u_isalpha(c) || u_isdigit(c); }
bool is_ascii_alpha(UChar32 c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_pictographic(UChar32 c) {
  return u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) ||
         u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER) ||
         (c >= 0x1F1E6 && c <= 0x1F1FF);
}

bool is_trailing_url_punct(UChar32 c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case ')': case ']': case '}': case '"': case '\'':
    case 0x00BB: case 0x2026: case 0x201D: case 0x2019:
      return true;
    default:
      return false;
  }
}

// Returns one past the last code point of a URL starting at `i`, or `i`
// when there is none. `cps` covers one whitespace-free chunk.
std::size_t match_url(const std::vector<CodePoint>& cps, std::size_t i) {
  const std::size_t n = cps.size();
  auto rest_of_path = [&](std::size_t j) {
    while (j < n && !is_pictographic(cps[j].value)) ++j;
    while (j > 0 && is_trailing_url_punct(cps[j - 1].value)) --j;
    return j;
  };

  // scheme://...
  if (is_ascii_alpha(cps[i].value)) {
    std::size_t j = i + 1;
    while (j < n && (is_ascii_alpha(cps[j].value) ||
                     (cps[j].value >= '0' && cps[j].value <= '9') ||
                     cps[j].value == '+' || cps[j].value == '.' ||
                     cps[j].value == '-'))
      ++j;
    if (j + 3 < n && cps[j].value == ':' && cps[j + 1].value == '/' &&
        cps[j + 2].value == '/') {
      const std::size_t end = rest_of_path(j + 3);
      if (end > j + 3) return end;
    }
  }

  // bare domain: label(.label)+ with an alphabetic final label of length >= 2
  std::size_t j = i;
  std::size_t labels = 0;
  std::size_t last_label_begin = i;
  std::size_t domain_end = i;
  while (true) {
    const std::size_t label_begin = j;
    while (j < n && (is_alnum(cps[j].value) || cps[j].value == '-')) ++j;
    if (j == label_begin || cps[label_begin].value == '-' ||
        cps[j - 1].value == '-')
      break;
    ++labels;
    last_label_begin = label_begin;
    domain_end = j;
    if (j + 1 < n && cps[j].value == '.' && is_alnum(cps[j + 1].value)) {
      ++j;
      continue;
    }
    break;
  }
  if (labels < 2) return i;
  if (domain_end - last_label_begin < 2) return i;
  for (std::size_t k = last_label_begin; k < domain_end; ++k)
    if (!u_isalpha(cps[k].value)) return i;

  std::size_t end = domain_end;
  if (end + 1 < n && cps[end].value == ':' && u_isdigit(cps[end + 1].value)) {
    ++end;
    while (end < n && u_isdigit(cps[end].value)) ++end;
  }
  if (end < n && cps[end].value == '/') end = std::max(end, rest_of_path(end));
  return end;
}

bool blocks_url_start(UChar32 c) {
  return is_alnum(c) || c == '-' || c == '.' || c == '_' || c == '@' ||
         c == '/';
}

// Same as find_urls but over an already-decoded whitespace-free chunk;
// returns code point index ranges.
std::vector<std::pair<std::size_t, std::size_t>> url_ranges(
    const std::vector<CodePoint>& cps) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (i == 0 || !blocks_url_start(cps[i - 1].value)) {
      const std::size_t end = match_url(cps, i);
      if (end > i) {
        out.emplace_back(i, end);
        i = end;
        continue;
      }
    }
    ++i;
  }
  return out;
}

// Splits text into whitespace-free chunks, returning decoded code points.
template <typename Fn>
void for_each_chunk(std::string_view text, Fn&& fn) {
  const auto cps = decode(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i].value)) ++i;
    const std::size_t begin = i;
    while (i < cps.size() && !is_space(cps[i].value)) ++i;
    if (i > begin)
      fn(std::vector<CodePoint>(cps.begin() + static_cast<long>(begin),
                                cps.begin() + static_cast<long>(i)));
  }
}

icu::UnicodeString to_ustring(std::string_view s) {
  return icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

class GraphemeBreaker {
 public:
  GraphemeBreaker() {
    UErrorCode status = U_ZERO_ERROR;
    it_.reset(icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(),
                                                          status));
    if (U_FAILURE(status)) throw Error("ICU grapheme iterator unavailable");
  }

  // Splits `text` into grapheme clusters.
  std::vector<std::string> clusters(std::string_view text) {
    std::vector<std::string> out;
    const icu::UnicodeString u = to_ustring(text);
    it_->setText(u);
    int32_t start = it_->first();
    for (int32_t end = it_->next(); end != icu::BreakIterator::DONE;
         start = end, end = it_->next()) {
      out.push_back(to_utf8(u.tempSubStringBetween(start, end)));
    }
    return out;
  }

 private:
  std::unique_ptr<icu::BreakIterator> it_;
};

GraphemeBreaker& breaker() {
  thread_local GraphemeBreaker b;
  return b;
}

bool is_emoji_cluster(std::string_view cluster) {
  const auto cps = decode(cluster);
  if (cps.empty()) return false;
  if (is_pictographic(cps.front().value)) return true;
  for (const auto& cp : cps)
    if (cp.value == 0x20E3) return true;  // keycap
  return false;
}

bool is_punct(UChar32 c) { return u_ispunct(c) != 0; }

void emit_word(std::string_view word, std::vector<std::string>& out) {
  const auto cps = decode(word);
  std::size_t lo = 0;
  std::size_t hi = cps.size();
  while (lo < hi && is_punct(cps[lo].value)) {
    out.emplace_back(word.substr(cps[lo].begin, cps[lo].end - cps[lo].begin));
    ++lo;
  }
  std::vector<std::string> trailing;
  while (hi > lo && is_punct(cps[hi - 1].value)) {
    --hi;
    trailing.emplace_back(
        word.substr(cps[hi].begin, cps[hi].end - cps[hi].begin));
  }
  if (hi > lo)
    out.emplace_back(word.substr(cps[lo].begin, cps[hi - 1].end - cps[lo].begin));
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

// Splits a URL-free piece of a chunk into emoji clusters and words.
void emit_plain(std::string_view piece, std::vector<std::string>& out) {
  std::string word;
  for (auto& cluster : breaker().clusters(piece)) {
    if (is_emoji_cluster(cluster)) {
      if (!word.empty()) emit_word(word, out);
      word.clear();
      out.push_back(std::move(cluster));
    } else {
      word += cluster;
    }
  }
  if (!word.empty()) emit_word(word, out);
}

}  // namespace

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normaliser unavailable");
  const icu::UnicodeString u = to_ustring(text);
  if (norm->isNormalized(u, status) && U_SUCCESS(status))
    return std::string(text);
  status = U_ZERO_ERROR;
  const icu::UnicodeString normalized = norm->normalize(u, status);
  if (U_FAILURE(status)) throw Error("NFC normalisation failed");
  return to_utf8(normalized);
}

std::string fold_case(std::string_view text) {
  icu::UnicodeString u = to_ustring(text);
  u.foldCase();
  return to_utf8(u);
}

std::vector<TextSpan> find_urls(std::string_view text) {
  std::vector<TextSpan> spans;
  for_each_chunk(text, [&](const std::vector<CodePoint>& cps) {
    for (const auto& [b, e] : url_ranges(cps))
      spans.push_back({cps[b].begin, cps[e - 1].end});
  });
  return spans;
}

std::vector<std::string> find_emoji(std::string_view text) {
  std::vector<std::string> out;
  for (auto& cluster : breaker().clusters(text))
    if (is_emoji_cluster(cluster)) out.push_back(std::move(cluster));
  return out;
}

std::string url_key(std::string_view url) {
  std::size_t host_begin = 0;
  if (const auto p = url.find("://"); p != std::string_view::npos)
    host_begin = p + 3;
  std::size_t host_end = url.find('/', host_begin);
  if (host_end == std::string_view::npos) host_end = url.size();
  std::string key = fold_case(url.substr(0, host_end));
  key.append(url.substr(host_end));
  return key;
}

std::string emoji_key(std::string_view emoji) {
  std::string out;
  for (const auto& cp : decode(emoji)) {
    if (cp.value == 0xFE0E || cp.value == 0xFE0F) continue;
    out.append(emoji.substr(cp.begin, cp.end - cp.begin));
  }
  return out;
}

TokenSequence tokenize(std::string_view text, Casing casing) {
  TokenSequence seq;
  seq.casing = casing;
  const std::string normalized = nfc(text);
  const std::string_view norm_view(normalized);
  for_each_chunk(norm_view, [&](const std::vector<CodePoint>& cps) {
    std::size_t cursor = cps.front().begin;
    const std::size_t chunk_end = cps.back().end;
    for (const auto& [b, e] : url_ranges(cps)) {
      if (cps[b].begin > cursor)
        emit_plain(norm_view.substr(cursor, cps[b].begin - cursor), seq.tokens);
      seq.tokens.emplace_back(
          norm_view.substr(cps[b].begin, cps[e - 1].end - cps[b].begin));
      cursor = cps[e - 1].end;
    }
    if (chunk_end > cursor)
      emit_plain(norm_view.substr(cursor, chunk_end - cursor), seq.tokens);
  });
  if (casing == Casing::kFolded)
    for (auto& t : seq.tokens) t = fold_case(t);
  return seq;
}

TokenSequence from_words(std::string_view text) {
  TokenSequence seq;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    const std::size_t begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > begin) seq.tokens.emplace_back(text.substr(begin, i - begin));
  }
  return seq;
}

}  // namespace mtkit::metrics
