#pragma once

#include <span>
#include <string>

#include "mtkit/metrics/breakdown.hpp"
#include "mtkit/metrics/tokenize.hpp"

namespace mtkit::metrics {

struct TerOptions {
  std::size_t max_shift_size = 10;
  std::size_t max_shift_distance = 50;
  std::size_t max_iterations = 50;
};

struct TerResult {
  // 100 * edits / reference length.
  double score = 0.0;
  TerBreakdown breakdown;
};

// Translation edit rate. Block shifts are chosen greedily: each round takes
// the shift that lowers the word edit distance the most (by more than the
// shift's own cost), preferring longer blocks and then the leftmost start.
// A block may move only if it contains a misaligned hypothesis word and
// lands on an exactly matching reference span that is itself misaligned.
// The remaining distance is computed by dynamic programming.
// Throws InvalidInput when the reference is empty.
TerResult ter(const TokenSequence& candidate, const TokenSequence& reference,
              const TerOptions& options = {});

// Plain word-level Levenshtein distance.
std::size_t word_edit_distance(std::span<const std::string> a,
                               std::span<const std::string> b);

}  // namespace mtkit::metrics
