#pragma once

#include <span>
#include <vector>

#include "mtkit/metrics/breakdown.hpp"
#include "mtkit/metrics/tokenize.hpp"

namespace mtkit::metrics {

enum class BleuSmoothing {
  kNone,
  // Zero precisions are replaced by epsilon inside the geometric mean.
  kAddEpsilon,
};

struct BleuOptions {
  std::size_t max_n = 4;
  // Empty means uniform 1/max_n.
  std::vector<double> weights;
  BleuSmoothing smoothing = BleuSmoothing::kAddEpsilon;
  double epsilon = 1e-9;
};

struct BleuResult {
  double score = 0.0;
  BleuBreakdown breakdown;
};

// Sentence BLEU: BP * exp(sum_n w_n log p_n) with per-reference maximum
// clipping and the closest reference length (ties go to the shorter one).
// Throws InvalidInput on an empty reference set.
BleuResult bleu(const TokenSequence& candidate,
                std::span<const TokenSequence> references,
                const BleuOptions& options = {});

// Corpus BLEU: clipped counts and lengths summed over all segments before
// the precisions and brevity penalty are formed.
BleuResult corpus_bleu(std::span<const TokenSequence> candidates,
                       std::span<const std::vector<TokenSequence>> references,
                       const BleuOptions& options = {});

}  // namespace mtkit::metrics
