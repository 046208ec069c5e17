#include "mtkit/metrics/integrity.hpp"

#include <gtest/gtest.h>

namespace mtkit::metrics {
namespace {

std::size_t count(const IntegrityReport& r, FindingKind kind) {
  std::size_t n = 0;
  for (const auto& f : r.findings)
    if (f.kind == kind) ++n;
  return n;
}

TEST(IntegrityTest, MutatedDomainIsFlagged) {
  const auto r = check_integrity("Подробности на We-are-not-alone.ru",
                                 "Details at We-Ra-not-alone.ru");
  EXPECT_FALSE(r.urls_preserved);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].kind, FindingKind::kUrlMutated);
  EXPECT_EQ(r.findings[0].detail, "We-are-not-alone.ru -> We-Ra-not-alone.ru");
}

TEST(IntegrityTest, HostChangeBeyondCaseIsMutation) {
  const auto r = check_integrity("Источник: espreso.tv", "Source: Espresso.TV");
  EXPECT_FALSE(r.urls_preserved);
  EXPECT_EQ(count(r, FindingKind::kUrlMutated), 1u);
}

TEST(IntegrityTest, HostCaseAloneIsPreservedButPathCaseIsNot) {
  EXPECT_TRUE(check_integrity("strana.today/News", "Strana.Today/News").urls_preserved);
  const auto r = check_integrity("t.me/NoName", "t.me/noname");
  EXPECT_FALSE(r.urls_preserved);
  EXPECT_EQ(count(r, FindingKind::kUrlMutated), 1u);
}

TEST(IntegrityTest, DroppedAndAddedUrls) {
  const auto dropped = check_integrity("a.ru b.ru", "a.ru");
  EXPECT_EQ(count(dropped, FindingKind::kUrlDropped), 1u);
  const auto added = check_integrity("a.ru", "a.ru c.com");
  EXPECT_EQ(count(added, FindingKind::kUrlAdded), 1u);
  EXPECT_FALSE(added.urls_preserved);
}

TEST(IntegrityTest, EmojiMultisetsEqual) {
  const auto r = check_integrity("⚡ Атака ⚡", "⚡ Attack ⚡");
  EXPECT_TRUE(r.emoji_preserved);
  EXPECT_EQ(r.emoji_source.at("⚡"), 2u);
  EXPECT_TRUE(r.findings.empty());
}

TEST(IntegrityTest, EmojiDroppedAndAdded) {
  const auto dropped = check_integrity("🔥 Атака 🔥 ⚡", "Attack ⚡");
  EXPECT_FALSE(dropped.emoji_preserved);
  EXPECT_EQ(count(dropped, FindingKind::kEmojiDropped), 2u);
  const auto added = check_integrity("Атака", "Attack 💥");
  EXPECT_EQ(count(added, FindingKind::kEmojiAdded), 1u);
}

TEST(IntegrityTest, VariationSelectorIsNotAChange) {
  EXPECT_TRUE(check_integrity("⚡\xEF\xB8\x8F", "⚡").emoji_preserved);
}

TEST(IntegrityTest, PreservedFlagsMatchMultisetEquality) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"x.ru ⚡", "x.ru ⚡"}, {"x.ru ⚡", "y.ru"}, {"", ""}, {"⚡⚡", "⚡"}};
  for (const auto& [s, t] : cases) {
    const auto r = check_integrity(s, t);
    EXPECT_EQ(r.urls_preserved, r.urls_source == r.urls_translation);
    EXPECT_EQ(r.emoji_preserved, r.emoji_source == r.emoji_translation);
  }
}

}  // namespace
}  // namespace mtkit::metrics
