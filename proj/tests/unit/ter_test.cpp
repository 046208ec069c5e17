#include "mtkit/metrics/ter.hpp"

#include <gtest/gtest.h>

#include <random>

#include "mtkit/common/errors.hpp"
#include "oracles.hpp"

namespace mtkit::metrics {
namespace {

TokenSequence seq(const std::string& s) { return from_words(s); }

TEST(TerTest, IdentityIsZero) {
  const auto x = seq("a b c d");
  EXPECT_EQ(ter(x, x).score, 0.0);
}

TEST(TerTest, SingleExtraHypothesisWord) {
  const auto r = ter(seq("a b c d e"), seq("a b c d"));
  EXPECT_EQ(r.breakdown.insertions, 1u);
  EXPECT_EQ(r.breakdown.edits(), 1u);
  EXPECT_DOUBLE_EQ(r.score, 25.0);
}

TEST(TerTest, MissingWordIsDeletion) {
  const auto r = ter(seq("a b d"), seq("a b c d"));
  EXPECT_EQ(r.breakdown.deletions, 1u);
  EXPECT_DOUBLE_EQ(r.score, 25.0);
}

TEST(TerTest, BlockSwapIsOneShift) {
  const auto r = ter(seq("c d a b"), seq("a b c d"));
  EXPECT_EQ(r.breakdown.shifts, 1u);
  EXPECT_EQ(r.breakdown.edits(), 1u);
  EXPECT_DOUBLE_EQ(r.score, 25.0);
}

TEST(TerTest, ShiftPlusSubstitution) {
  // move "on the mat" to the end, then fix one word
  const auto r = ter(seq("on the mat the dog sat"), seq("the cat sat on the mat"));
  EXPECT_EQ(r.breakdown.shifts, 1u);
  EXPECT_EQ(r.breakdown.substitutions, 1u);
  EXPECT_NEAR(r.score, 100.0 * 2.0 / 6.0, 1e-12);
}

TEST(TerTest, EmptyHypothesisIsAllDeletions) {
  const auto r = ter(TokenSequence{}, seq("a b"));
  EXPECT_EQ(r.breakdown.deletions, 2u);
  EXPECT_DOUBLE_EQ(r.score, 100.0);
}

TEST(TerTest, CanExceedHundred) {
  const auto r = ter(seq("x y z w v"), seq("a b"));
  EXPECT_DOUBLE_EQ(r.score, 250.0);
}

TEST(TerTest, EmptyReferenceRejected) {
  EXPECT_THROW(ter(seq("a"), TokenSequence{}), InvalidInput);
}

// Greedy search only takes shifts that pay for themselves at once; when the
// optimum needs two shifts that are individually break-even, it stops early.
TEST(TerTest, GreedyStopsAtBreakEvenShifts) {
  const auto hyp = oracle::words("b a a c");
  const auto ref = oracle::words("a b c a");
  const auto r = ter({hyp, Casing::kPreserved}, {ref, Casing::kPreserved});
  EXPECT_EQ(r.breakdown.edits(), 3u);
  EXPECT_EQ(oracle::ExhaustiveTer(4).edits(hyp, ref), 2u);
}

TEST(TerTest, NeverWorseThanEditDistanceAndAtLeastOptimum) {
  const oracle::ExhaustiveTer exhaustive(6);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> len(1, 6), word(0, 3);
  for (int trial = 0; trial < 2000; ++trial) {
    auto make = [&] {
      oracle::Tokens t(static_cast<std::size_t>(len(rng)));
      for (auto& w : t) w = std::string(1, static_cast<char>('a' + word(rng)));
      return t;
    };
    const auto h = make();
    const auto rf = make();
    const auto r = ter({h, Casing::kPreserved}, {rf, Casing::kPreserved});
    EXPECT_LE(r.breakdown.edits(), oracle::levenshtein(h, rf));
    EXPECT_GE(r.breakdown.edits(), exhaustive.edits(h, rf));
    EXPECT_LE(r.breakdown.shifts, r.breakdown.edits());
    EXPECT_LE(r.score, 100.0 * double(oracle::levenshtein(h, rf)) / double(rf.size()));
  }
}

TEST(TerTest, WordEditDistance) {
  const std::vector<std::string> a{"a", "b", "c"}, b{"a", "c", "d"};
  EXPECT_EQ(word_edit_distance(a, b), 2u);
  EXPECT_EQ(word_edit_distance(a, a), 0u);
}

}  // namespace
}  // namespace mtkit::metrics
