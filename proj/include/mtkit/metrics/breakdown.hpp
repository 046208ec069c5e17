#pragma once

#include <cstddef>
#include <variant>
#include <vector>

namespace mtkit::metrics {

struct BleuBreakdown {
  // Modified (clipped) n-gram precisions, index 0 is unigrams. An order
  // with no candidate n-grams reports 0.
  std::vector<double> precisions;
  std::vector<std::size_t> clipped_matches;
  std::vector<std::size_t> candidate_ngrams;
  double brevity_penalty = 1.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

struct MeteorBreakdown {
  double precision = 0.0;
  double recall = 0.0;
  double f_mean = 0.0;
  std::size_t matches = 0;
  std::size_t exact_matches = 0;
  std::size_t stem_matches = 0;
  std::size_t chunks = 0;
  double fragmentation_penalty = 0.0;
  // False only when the chunk-minimising search hit its node budget and
  // the alignment is the best found rather than a proven optimum.
  bool alignment_exact = true;
};

// Edit counts are from the hypothesis' point of view: an insertion is a
// hypothesis word absent from the reference, a deletion is a reference
// word the hypothesis lacks.
struct TerBreakdown {
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;
  std::size_t shifts = 0;
  std::size_t reference_length = 0;

  std::size_t edits() const noexcept {
    return insertions + deletions + substitutions + shifts;
  }
};

using MetricBreakdown = std::variant<BleuBreakdown, MeteorBreakdown, TerBreakdown>;

}  // namespace mtkit::metrics
