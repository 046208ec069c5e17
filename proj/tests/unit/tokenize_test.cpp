#include "mtkit/metrics/tokenize.hpp"

#include <gtest/gtest.h>

namespace mtkit::metrics {
namespace {

using Tokens = std::vector<std::string>;

TEST(TokenizeTest, BareDomainStaysOneToken) {
  EXPECT_EQ(tokenize("Visit strana.today now!").tokens,
            (Tokens{"Visit", "strana.today", "now", "!"}));
}

TEST(TokenizeTest, EmptyInput) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("  \n\t ").empty());
}

TEST(TokenizeTest, EmojiSplitFromAdjacentWord) {
  EXPECT_EQ(tokenize("⚡Атака⚡").tokens, (Tokens{"⚡", "Атака", "⚡"}));
}

TEST(TokenizeTest, EmojiSequencesAreSingleTokens) {
  // ZWJ family, a flag, a keycap and a skin-tone modified hand.
  const auto seq = tokenize("👨‍👩‍👧 🇷🇺 1️⃣ 👍🏽");
  EXPECT_EQ(seq.tokens, (Tokens{"👨‍👩‍👧", "🇷🇺", "1️⃣", "👍🏽"}));
}

TEST(TokenizeTest, SchemeUrlKeepsQueryAndDropsSentencePeriod) {
  EXPECT_EQ(tokenize("See https://x.ru/a?b=1&c=D.").tokens,
            (Tokens{"See", "https://x.ru/a?b=1&c=D", "."}));
}

TEST(TokenizeTest, UrlPathAndGuillemets) {
  EXPECT_EQ(tokenize("«We-are-not-alone.ru/news»").tokens,
            (Tokens{"«", "We-are-not-alone.ru/news", "»"}));
}

TEST(TokenizeTest, AbbreviationsAndNumbersAreNotUrls) {
  EXPECT_EQ(tokenize("т.е. 3.5").tokens, (Tokens{"т.е", ".", "3.5"}));
  EXPECT_EQ(tokenize("gpt-3.5-turbo-0125").tokens,
            (Tokens{"gpt-3.5-turbo-0125"}));
}

TEST(TokenizeTest, InteriorPunctuationStays) {
  EXPECT_EQ(tokenize("(DDoS-attacks), don't").tokens,
            (Tokens{"(", "DDoS-attacks", ")", ",", "don't"}));
}

TEST(TokenizeTest, NfcNormalisesDecomposedInput) {
  // "й" as и + combining breve vs the precomposed letter
  EXPECT_EQ(tokenize("и\xCC\x86").tokens, tokenize("й").tokens);
  EXPECT_EQ(nfc("и\xCC\x86"), "й");
}

TEST(TokenizeTest, CaseFolding) {
  const auto seq = tokenize("Атака DDoS", Casing::kFolded);
  EXPECT_EQ(seq.casing, Casing::kFolded);
  EXPECT_EQ(seq.tokens, (Tokens{"атака", "ddos"}));
}

TEST(TokenizeTest, FindUrlsReportsByteSpans) {
  const std::string text = "a espreso.tv, b https://t.me/x";
  const auto spans = find_urls(text);
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(text.substr(spans[0].begin, spans[0].end - spans[0].begin),
            "espreso.tv");
  EXPECT_EQ(text.substr(spans[1].begin, spans[1].end - spans[1].begin),
            "https://t.me/x");
}

TEST(TokenizeTest, UrlKeyFoldsHostOnly) {
  EXPECT_EQ(url_key("Strana.Today/Path"), "strana.today/Path");
  EXPECT_EQ(url_key("HTTPS://T.me/AbC"), "https://t.me/AbC");
}

TEST(TokenizeTest, EmojiKeyIgnoresVariationSelector) {
  EXPECT_EQ(emoji_key("⚡\xEF\xB8\x8F"), emoji_key("⚡"));
}

}  // namespace
}  // namespace mtkit::metrics
