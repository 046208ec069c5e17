#include "mtkit/metrics/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "mtkit/common/errors.hpp"

namespace mtkit::metrics {
namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

// Length-prefixed join, so distinct token tuples never share a key.
std::string ngram_key(const std::vector<std::string>& tokens, std::size_t pos,
                      std::size_t n) {
  std::string key;
  for (std::size_t k = pos; k < pos + n; ++k) {
    key += std::to_string(tokens[k].size());
    key += ':';
    key += tokens[k];
  }
  return key;
}

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[ngram_key(tokens, i, n)];
  return counts;
}

struct SegmentStats {
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

std::size_t closest_reference_length(std::size_t c,
                                     std::span<const TokenSequence> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [c](std::size_t len) {
      return len > c ? len - c : c - len;
    };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best))
      best = r.size();
  }
  return best;
}

SegmentStats segment_stats(const TokenSequence& candidate,
                           std::span<const TokenSequence> references,
                           std::size_t max_n) {
  if (references.empty())
    throw InvalidInput("bleu: reference set must not be empty");
  SegmentStats s;
  s.matches.assign(max_n, 0);
  s.totals.assign(max_n, 0);
  s.candidate_length = candidate.size();
  s.reference_length = closest_reference_length(candidate.size(), references);
  for (std::size_t n = 1; n <= max_n; ++n) {
    const NgramCounts cand = count_ngrams(candidate.tokens, n);
    NgramCounts max_ref;
    for (const auto& ref : references)
      for (const auto& [key, count] : count_ngrams(ref.tokens, n)) {
        auto& slot = max_ref[key];
        slot = std::max(slot, count);
      }
    for (const auto& [key, count] : cand) {
      const auto it = max_ref.find(key);
      if (it != max_ref.end()) s.matches[n - 1] += std::min(count, it->second);
    }
    s.totals[n - 1] =
        candidate.size() >= n ? candidate.size() - n + 1 : std::size_t{0};
  }
  return s;
}

std::vector<double> resolve_weights(const BleuOptions& options) {
  if (options.max_n == 0) throw InvalidInput("bleu: max_n must be positive");
  if (options.weights.empty())
    return std::vector<double>(options.max_n,
                               1.0 / static_cast<double>(options.max_n));
  if (options.weights.size() != options.max_n)
    throw InvalidInput("bleu: weights must have max_n entries");
  return options.weights;
}

BleuResult finish(const SegmentStats& s, const BleuOptions& options) {
  const auto weights = resolve_weights(options);
  BleuResult result;
  auto& b = result.breakdown;
  b.clipped_matches = s.matches;
  b.candidate_ngrams = s.totals;
  b.candidate_length = s.candidate_length;
  b.reference_length = s.reference_length;
  b.precisions.resize(options.max_n);

  const double c = static_cast<double>(s.candidate_length);
  const double r = static_cast<double>(s.reference_length);
  if (s.candidate_length == 0) {
    b.brevity_penalty = 0.0;
    result.score = 0.0;
    return result;
  }
  b.brevity_penalty = s.candidate_length >= s.reference_length
                          ? 1.0
                          : std::exp(1.0 - r / c);

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < options.max_n; ++n) {
    const double p = s.totals[n] == 0
                         ? 0.0
                         : static_cast<double>(s.matches[n]) /
                               static_cast<double>(s.totals[n]);
    b.precisions[n] = p;
    if (p > 0.0) {
      log_sum += weights[n] * std::log(p);
    } else if (options.smoothing == BleuSmoothing::kAddEpsilon) {
      log_sum += weights[n] * std::log(options.epsilon);
    } else {
      zero = true;
    }
  }
  result.score = zero ? 0.0 : b.brevity_penalty * std::exp(log_sum);
  return result;
}

}  // namespace

BleuResult bleu(const TokenSequence& candidate,
                std::span<const TokenSequence> references,
                const BleuOptions& options) {
  resolve_weights(options);
  return finish(segment_stats(candidate, references, options.max_n), options);
}

BleuResult corpus_bleu(std::span<const TokenSequence> candidates,
                       std::span<const std::vector<TokenSequence>> references,
                       const BleuOptions& options) {
  if (candidates.size() != references.size())
    throw InvalidInput("corpus_bleu: candidate and reference counts differ");
  resolve_weights(options);
  SegmentStats total;
  total.matches.assign(options.max_n, 0);
  total.totals.assign(options.max_n, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto s = segment_stats(candidates[i], references[i], options.max_n);
    for (std::size_t n = 0; n < options.max_n; ++n) {
      total.matches[n] += s.matches[n];
      total.totals[n] += s.totals[n];
    }
    total.candidate_length += s.candidate_length;
    total.reference_length += s.reference_length;
  }
  return finish(total, options);
}

}  // namespace mtkit::metrics
