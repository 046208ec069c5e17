#include "mtkit/metrics/bleu.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mtkit/common/errors.hpp"
#include "oracles.hpp"

namespace mtkit::metrics {
namespace {

TokenSequence seq(const std::string& s) { return from_words(s); }

TEST(BleuTest, IdentityIsExactlyOne) {
  const auto x = seq("the cat is on the mat");
  const std::vector<TokenSequence> refs{x};
  EXPECT_EQ(bleu(x, refs).score, 1.0);
}

TEST(BleuTest, ClippedUnigramPrecision) {
  const std::vector<TokenSequence> refs{seq("the cat is on the mat")};
  const auto r = bleu(seq("the the the the the the the"), refs);
  EXPECT_EQ(r.breakdown.precisions[0], 2.0 / 7.0);
  EXPECT_EQ(r.breakdown.clipped_matches[0], 2u);
  EXPECT_EQ(r.breakdown.candidate_ngrams[0], 7u);
}

TEST(BleuTest, ClippingUsesPerReferenceMaximum) {
  const std::vector<TokenSequence> refs{seq("the cat"), seq("the the the dog")};
  const auto r = bleu(seq("the the the the"), refs, {.max_n = 1});
  EXPECT_EQ(r.breakdown.precisions[0], 3.0 / 4.0);
}

TEST(BleuTest, ClosestReferenceLengthTiesGoShorter) {
  const std::vector<TokenSequence> refs{seq("a b c d e f"), seq("a b")};
  // candidate length 4: distances 2 and 2, shorter reference wins
  const auto r = bleu(seq("a b c d"), refs);
  EXPECT_EQ(r.breakdown.reference_length, 2u);
  EXPECT_EQ(r.breakdown.brevity_penalty, 1.0);
}

TEST(BleuTest, BrevityPenaltyForShortCandidate) {
  const std::vector<TokenSequence> refs{seq("a b c d e f g h")};
  const auto r = bleu(seq("a b c d"), refs);
  EXPECT_DOUBLE_EQ(r.breakdown.brevity_penalty, std::exp(1.0 - 8.0 / 4.0));
  EXPECT_DOUBLE_EQ(r.score, std::exp(1.0 - 2.0));
}

TEST(BleuTest, UnsmoothedZeroPrecisionGivesZero) {
  const std::vector<TokenSequence> refs{seq("a b c d e")};
  const auto r = bleu(seq("a x b y c"), refs, {.smoothing = BleuSmoothing::kNone});
  EXPECT_GT(r.breakdown.precisions[0], 0.0);
  EXPECT_EQ(r.breakdown.precisions[1], 0.0);
  EXPECT_EQ(r.score, 0.0);
}

TEST(BleuTest, EpsilonSmoothingKeepsScorePositive) {
  const std::vector<TokenSequence> refs{seq("a b c d e")};
  const auto r = bleu(seq("a x b y c"), refs);
  EXPECT_GT(r.score, 0.0);
  EXPECT_LT(r.score, 1e-3);
}

TEST(BleuTest, EmptyCandidateScoresZero) {
  const std::vector<TokenSequence> refs{seq("a b")};
  EXPECT_EQ(bleu(TokenSequence{}, refs).score, 0.0);
}

TEST(BleuTest, EmptyReferenceSetRejected) {
  EXPECT_THROW(bleu(seq("a"), std::span<const TokenSequence>{}), InvalidInput);
}

TEST(BleuTest, CorpusBleuSumsCountsBeforeCombining) {
  const std::vector<TokenSequence> cands{seq("a b c d"), seq("e f g h")};
  const std::vector<std::vector<TokenSequence>> refs{{seq("a b c d")},
                                                     {seq("e f g h")}};
  EXPECT_EQ(corpus_bleu(cands, refs).score, 1.0);
  const auto r = corpus_bleu(cands, refs, {.max_n = 4});
  EXPECT_EQ(r.breakdown.candidate_length, 8u);
  EXPECT_EQ(r.breakdown.clipped_matches[3], 2u);
}

// Random sentences against the scanning oracle, and the formula bound
// score <= min(1, exp(1 - r/c)).
TEST(BleuTest, MatchesBruteForceOracleAndBound) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> len(1, 12), word(0, 5), nrefs(1, 3);
  for (int trial = 0; trial < 300; ++trial) {
    auto make = [&] {
      oracle::Tokens t(static_cast<std::size_t>(len(rng)));
      for (auto& w : t) w = std::string(1, static_cast<char>('a' + word(rng)));
      return t;
    };
    const oracle::Tokens cand = make();
    std::vector<oracle::Tokens> ref_words;
    std::vector<TokenSequence> refs;
    for (int k = nrefs(rng); k > 0; --k) {
      ref_words.push_back(make());
      refs.push_back({ref_words.back(), Casing::kPreserved});
    }
    const auto got = bleu({cand, Casing::kPreserved}, refs);
    const auto want = oracle::bleu(cand, ref_words);
    EXPECT_NEAR(got.score, want.score, 1e-12);
    for (std::size_t n = 0; n < 4; ++n)
      EXPECT_EQ(got.breakdown.precisions[n], want.precisions[n]);
    EXPECT_GE(got.score, 0.0);
    EXPECT_LE(got.score, 1.0);
    const double c = double(cand.size());
    const double r = double(got.breakdown.reference_length);
    EXPECT_LE(got.score, std::min(1.0, std::exp(1.0 - r / c)) + 1e-15);
  }
}

}  // namespace
}  // namespace mtkit::metrics
