#pragma once

#include <vector>

#include "mtkit/metrics/breakdown.hpp"
#include "mtkit/metrics/tokenize.hpp"

namespace mtkit::metrics {

struct MeteorOptions {
  // Second matching stage on Porter stems of the tokens left unmatched by
  // the exact stage. There is no synonym stage.
  bool stem = false;
  // Upper bound on search nodes per stage when minimising chunks.
  std::size_t search_budget = 2'000'000;
};

struct MeteorResult {
  double score = 0.0;
  MeteorBreakdown breakdown;
  // Reference index aligned to each candidate token, -1 when unmatched.
  std::vector<long> alignment;
};

// Unigram alignment with the maximum number of matches; among those, the
// one with the fewest chunks. F_mean = 10PR / (R + 9P),
// penalty = 0.5 * (chunks / matches)^3, score = F_mean * (1 - penalty).
MeteorResult meteor(const TokenSequence& candidate,
                    const TokenSequence& reference,
                    const MeteorOptions& options = {});

}  // namespace mtkit::metrics
