#include "mtkit/metrics/integrity.hpp"

#include <algorithm>

#include "mtkit/metrics/tokenize.hpp"

namespace mtkit::metrics {
namespace {

struct Extracted {
  std::vector<std::string> raw;
  std::vector<std::string> keys;
};

Extracted extract_urls(std::string_view text) {
  Extracted out;
  for (const auto& span : find_urls(text)) {
    auto raw = std::string(text.substr(span.begin, span.end - span.begin));
    out.keys.push_back(url_key(raw));
    out.raw.push_back(std::move(raw));
  }
  return out;
}

Multiset to_multiset(const std::vector<std::string>& keys) {
  Multiset ms;
  for (const auto& k : keys) ++ms[k];
  return ms;
}

// Removes pairwise-equal keys, leaving the unmatched items of each side in
// order of appearance.
void cancel_common(Extracted& a, Extracted& b) {
  std::vector<bool> used_b(b.keys.size(), false);
  Extracted rest_a;
  for (std::size_t i = 0; i < a.keys.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < b.keys.size(); ++j)
      if (!used_b[j] && b.keys[j] == a.keys[i]) {
        used_b[j] = true;
        found = true;
        break;
      }
    if (!found) {
      rest_a.raw.push_back(a.raw[i]);
      rest_a.keys.push_back(a.keys[i]);
    }
  }
  Extracted rest_b;
  for (std::size_t j = 0; j < b.keys.size(); ++j)
    if (!used_b[j]) {
      rest_b.raw.push_back(b.raw[j]);
      rest_b.keys.push_back(b.keys[j]);
    }
  a = std::move(rest_a);
  b = std::move(rest_b);
}

}  // namespace

std::string_view to_string(FindingKind kind) {
  switch (kind) {
    case FindingKind::kUrlMutated: return "url_mutated";
    case FindingKind::kUrlDropped: return "url_dropped";
    case FindingKind::kUrlAdded: return "url_added";
    case FindingKind::kEmojiDropped: return "emoji_dropped";
    case FindingKind::kEmojiAdded: return "emoji_added";
  }
  return "unknown";
}

IntegrityReport check_integrity(std::string_view source,
                                std::string_view translation) {
  IntegrityReport report;

  Extracted src_urls = extract_urls(source);
  Extracted tr_urls = extract_urls(translation);
  report.urls_source = to_multiset(src_urls.keys);
  report.urls_translation = to_multiset(tr_urls.keys);
  report.urls_preserved = report.urls_source == report.urls_translation;

  cancel_common(src_urls, tr_urls);
  // Unmatched translation URLs are paired with unmatched source URLs in
  // order of appearance.
  const std::size_t paired = std::min(src_urls.raw.size(), tr_urls.raw.size());
  for (std::size_t i = 0; i < paired; ++i)
    report.findings.push_back({FindingKind::kUrlMutated,
                               src_urls.raw[i] + " -> " + tr_urls.raw[i]});
  for (std::size_t i = paired; i < src_urls.raw.size(); ++i)
    report.findings.push_back({FindingKind::kUrlDropped, src_urls.raw[i]});
  for (std::size_t i = paired; i < tr_urls.raw.size(); ++i)
    report.findings.push_back({FindingKind::kUrlAdded, tr_urls.raw[i]});

  std::vector<std::string> src_emoji, tr_emoji;
  for (const auto& e : find_emoji(source)) src_emoji.push_back(emoji_key(e));
  for (const auto& e : find_emoji(translation)) tr_emoji.push_back(emoji_key(e));
  report.emoji_source = to_multiset(src_emoji);
  report.emoji_translation = to_multiset(tr_emoji);
  report.emoji_preserved = report.emoji_source == report.emoji_translation;
  for (const auto& [emoji, count] : report.emoji_source) {
    const auto it = report.emoji_translation.find(emoji);
    const std::size_t have = it == report.emoji_translation.end() ? 0 : it->second;
    for (std::size_t k = have; k < count; ++k)
      report.findings.push_back({FindingKind::kEmojiDropped, emoji});
  }
  for (const auto& [emoji, count] : report.emoji_translation) {
    const auto it = report.emoji_source.find(emoji);
    const std::size_t have = it == report.emoji_source.end() ? 0 : it->second;
    for (std::size_t k = have; k < count; ++k)
      report.findings.push_back({FindingKind::kEmojiAdded, emoji});
  }
  return report;
}

}  // namespace mtkit::metrics
