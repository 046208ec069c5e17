#include "mtkit/orchestrator/orchestrator.hpp"

#include <gtest/gtest.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fake_vendor.hpp"
#include "mtkit/common/errors.hpp"

namespace mtkit::orchestrator {
namespace {

using corpus::MessageKey;
using testing_support::completion;
using testing_support::FakeVendor;
using testing_support::ScriptedResponse;

constexpr const char* kSecretVar = "MTKIT_TEST_VENDOR_KEY";
constexpr const char* kSecret = "sk-test-7f3a9c1e5b2d4068-SECRET";

std::string jsonl(int from, int to) {
  std::string out;
  for (int i = from; i <= to; ++i)
    out += "{\"channel_id\":\"c\",\"message_id\":" + std::to_string(i) +
           ",\"date\":" + std::to_string(1000 + i) + ",\"text\":\"Атака " +
           std::to_string(i) + " на сайт\"}\n";
  return out;
}

BackendConfig mock_backend(const std::string& id) {
  BackendConfig c;
  c.backend_id = id;
  c.kind = BackendKind::kMockDictionary;
  c.model_name = "mock-" + id;
  c.dictionary = {{"Атака", "Attack"}, {"на", "on"}, {"сайт", id}};
  return c;
}

BackendConfig http_backend(const std::string& id, const std::string& url) {
  BackendConfig c;
  c.backend_id = id;
  c.kind = BackendKind::kChatCompletionHttp;
  c.endpoint = url;
  c.model_name = "gpt-3.5-turbo-0125";
  c.auth_env_var = kSecretVar;
  c.retry.backoff_base = std::chrono::milliseconds(1);
  c.retry.backoff_cap = std::chrono::milliseconds(5);
  c.http.timeout = std::chrono::milliseconds(2000);
  return c;
}

class OrchestratorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ::setenv(kSecretVar, kSecret, 1);
    std::istringstream in(jsonl(1, 100));
    corpus.import_export(in, "c");
    orch.register_prompt(default_prompt());
  }

  Database db{":memory:"};
  corpus::Corpus corpus{db};
  Orchestrator orch{db};
};

TEST_F(OrchestratorTest, MockDictionaryLookup) {
  BackendConfig c = mock_backend("m");
  c.dictionary = {{"Атака 1 на сайт", "Attack 1 on the site"}, {"x", "y"}, {"z", "w"}};
  orch.register_backend(c);
  const auto r = orch.translate({"c", 1}, "m", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kOk);
  EXPECT_EQ(r.output_text, "Attack 1 on the site");
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_EQ(r.prompt_hash, default_prompt().content_hash);
  EXPECT_EQ(orch.records().size(), 1u);
}

TEST(MockTranslate, WordSubstitutionKeepsWhitespace) {
  const std::map<std::string, std::string> dict{{"Атака", "Attack"}, {"на", "on"}};
  EXPECT_EQ(mock_translate(dict, "Атака  на\nсайт"), "Attack  on\nсайт");
  EXPECT_EQ(mock_translate(dict, ""), "");
}

TEST_F(OrchestratorTest, RegistrationAndListing) {
  orch.register_backend(http_backend("gpt-3.5-turbo-0125", "https://api.example.com/v1/chat"));
  const auto listed = orch.backends();
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0].model_name, "gpt-3.5-turbo-0125");
  EXPECT_EQ(listed[0].auth_env_var, kSecretVar);
  EXPECT_THROW(orch.register_backend(http_backend("gpt-3.5-turbo-0125", "https://x.org/")),
               ConflictError);
  EXPECT_THROW(orch.register_backend(http_backend("rel", "/v1/chat")), InvalidInput);
}

TEST_F(OrchestratorTest, RequestShape) {
  FakeVendor vendor({{200, completion("Attack 1 on the site")}});
  orch.register_backend(http_backend("h", vendor.url()));
  const auto r = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kOk);
  EXPECT_EQ(r.output_text, "Attack 1 on the site");
  ASSERT_TRUE(r.usage);
  EXPECT_EQ(r.usage->input_tokens, 400);
  EXPECT_EQ(r.usage->output_tokens, 192);
  const auto received = vendor.received();
  ASSERT_EQ(received.size(), 1u);
  const auto body = nlohmann::json::parse(received[0].body);
  EXPECT_EQ(body["model"], "gpt-3.5-turbo-0125");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 1024);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], std::string(default_prompt_text()));
  EXPECT_EQ(body["messages"][1]["content"], "Атака 1 на сайт");
  EXPECT_EQ(received[0].authorization, std::string("Bearer ") + kSecret);
}

TEST_F(OrchestratorTest, PolicyRefusalIsTerminal) {
  FakeVendor vendor({{400, R"({"error":{"message":"flagged","type":"invalid_request_error",)"
                           R"("code":"content_policy_violation"}})"},
                     {200, completion("never reached")}});
  orch.register_backend(http_backend("h", vendor.url()));
  const auto r = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kRefused);
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_FALSE(r.output_text);
  EXPECT_EQ(vendor.received().size(), 1u);
}

TEST_F(OrchestratorTest, ContentFilterFinishReasonIsRefusal) {
  FakeVendor vendor({{200, completion("", "content_filter")}});
  orch.register_backend(http_backend("h", vendor.url()));
  EXPECT_EQ(orch.translate({"c", 1}, "h", "appendix-1").status, TranslationStatus::kRefused);
}

TEST_F(OrchestratorTest, TransientFailuresRetried) {
  FakeVendor vendor({{503, "{}"}, {500, "oops"}, {200, completion("Attack")}});
  orch.register_backend(http_backend("h", vendor.url()));
  const auto r = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kOk);
  EXPECT_EQ(r.attempt_count, 3);
  EXPECT_EQ(vendor.received().size(), 3u);
}

TEST_F(OrchestratorTest, RateLimitedAfterRetries) {
  FakeVendor vendor({{429, R"({"error":{"code":"rate_limit_exceeded"}})", "0"}});
  orch.register_backend(http_backend("h", vendor.url()));
  const auto r = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kRateLimited);
  EXPECT_EQ(r.attempt_count, 3);
}

TEST_F(OrchestratorTest, UnreachableEndpointIsTransportError) {
  std::string url;
  {
    FakeVendor gone({{200, completion("x")}});
    url = gone.url();
  }
  orch.register_backend(http_backend("h", url));
  const auto r = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kTransportError);
  EXPECT_EQ(r.attempt_count, 3);
}

TEST_F(OrchestratorTest, EmptyCompletionIsInvalidResponse) {
  FakeVendor vendor({{200, completion("")}});
  orch.register_backend(http_backend("h", vendor.url()));
  const auto r = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_EQ(r.status, TranslationStatus::kInvalidResponse);
  EXPECT_EQ(r.attempt_count, 1);
  FakeVendor garbage({{200, "not json"}});
  orch.register_backend(http_backend("g", garbage.url()));
  EXPECT_EQ(orch.translate({"c", 1}, "g", "appendix-1").status,
            TranslationStatus::kInvalidResponse);
}

TEST_F(OrchestratorTest, MissingKeyIsAuthErrorAtCallTime) {
  FakeVendor vendor({{200, completion("x")}});
  auto c = http_backend("h", vendor.url());
  c.auth_env_var = "MTKIT_TEST_UNSET_VARIABLE";
  ::unsetenv("MTKIT_TEST_UNSET_VARIABLE");
  EXPECT_NO_THROW(orch.register_backend(c));
  EXPECT_THROW(orch.translate({"c", 1}, "h", "appendix-1"), AuthError);
  EXPECT_THROW(orch.translate_batch({{"c", 1}}, {"h"}, "appendix-1", 1), AuthError);
  EXPECT_TRUE(orch.records().empty());
  EXPECT_TRUE(vendor.received().empty());
}

TEST_F(OrchestratorTest, UnknownReferencesAreNotFound) {
  orch.register_backend(mock_backend("m"));
  EXPECT_THROW(orch.translate({"c", 999}, "m", "appendix-1"), NotFound);
  EXPECT_THROW(orch.translate({"c", 1}, "nope", "appendix-1"), NotFound);
  EXPECT_THROW(orch.translate({"c", 1}, "m", "nope"), NotFound);
}

TEST_F(OrchestratorTest, EightHundredTranslations) {
  std::vector<std::string> ids;
  for (int b = 0; b < 8; ++b) {
    ids.push_back("mock" + std::to_string(b));
    orch.register_backend(mock_backend(ids.back()));
  }
  std::vector<MessageKey> keys;
  for (int i = 1; i <= 100; ++i) keys.push_back({"c", i});
  const auto report = orch.translate_batch(keys, ids, "appendix-1", 8);
  EXPECT_EQ(report.total(), 800u);
  for (const auto& [id, counts] : report.per_backend) EXPECT_EQ(counts.ok, 100u);
  EXPECT_EQ(orch.records().size(), 800u);
}

TEST_F(OrchestratorTest, EmptyBatch) {
  orch.register_backend(mock_backend("m"));
  const auto report = orch.translate_batch({}, {"m"}, "appendix-1", 4);
  EXPECT_EQ(report.total(), 0u);
  EXPECT_TRUE(orch.records().empty());
  EXPECT_THROW(orch.translate_batch({}, {"m"}, "appendix-1", 0), InvalidInput);
}

TEST_F(OrchestratorTest, BatchCountsPartialFailures) {
  FakeVendor vendor({{200, completion("ok")},
                     {400, R"({"error":{"code":"content_policy_violation"}})"},
                     {500, "{}"}});
  auto c = http_backend("h", vendor.url());
  c.retry.max_attempts = 1;
  orch.register_backend(c);
  orch.register_backend(mock_backend("m"));
  const auto report =
      orch.translate_batch({{"c", 1}, {"c", 2}, {"c", 3}}, {"h", "m"}, "appendix-1", 1);
  EXPECT_EQ(report.total(), 6u);
  EXPECT_EQ(report.per_backend.at("h").ok, 1u);
  EXPECT_EQ(report.per_backend.at("h").refused, 1u);
  EXPECT_EQ(report.per_backend.at("h").failed, 1u);
  EXPECT_EQ(report.per_backend.at("m").ok, 3u);
}

TEST_F(OrchestratorTest, RateLimitSpacingObservedByServer) {
  FakeVendor vendor({{200, completion("ok")}});
  auto c = http_backend("h", vendor.url());
  c.rate_limit = 60.0;
  orch.register_backend(c);
  std::vector<MessageKey> keys;
  for (int i = 1; i <= 10; ++i) keys.push_back({"c", i});
  const auto report = orch.translate_batch(keys, {"h"}, "appendix-1", 4);
  EXPECT_EQ(report.per_backend.at("h").ok, 10u);
  auto received = vendor.received();
  ASSERT_EQ(received.size(), 10u);
  std::sort(received.begin(), received.end(),
            [](const auto& a, const auto& b) { return a.at < b.at; });
  // Spacing is enforced at send time. Arrival adds connection and
  // scheduling jitter to each gap, but jitter cannot accumulate.
  constexpr auto kJitter = std::chrono::milliseconds(50);
  for (std::size_t i = 1; i < received.size(); ++i) {
    const auto gap = received[i].at - received[i - 1].at;
    EXPECT_GE(gap, std::chrono::milliseconds(1000) - kJitter)
        << "between requests " << i - 1 << " and " << i;
  }
  EXPECT_GE(received.back().at - received.front().at, std::chrono::milliseconds(9000) - kJitter);
}

std::vector<std::tuple<std::string, std::int64_t, std::string, std::string>> mock_content(
    int threads) {
  Database db(":memory:");
  corpus::Corpus corpus(db);
  std::istringstream in(jsonl(1, 40));
  corpus.import_export(in, "c");
  Orchestrator orch(db);
  orch.register_prompt(default_prompt());
  orch.register_backend(mock_backend("a"));
  orch.register_backend(mock_backend("b"));
  std::vector<MessageKey> keys;
  for (int i = 1; i <= 40; ++i) keys.push_back({"c", i});
  orch.translate_batch(keys, {"a", "b"}, "appendix-1", static_cast<std::size_t>(threads));
  std::vector<std::tuple<std::string, std::int64_t, std::string, std::string>> out;
  for (const auto& r : orch.records())
    out.emplace_back(r.backend_id, r.message.message_id, *r.output_text,
                     std::to_string(r.usage->input_tokens) + "/" +
                         std::to_string(r.usage->output_tokens));
  std::sort(out.begin(), out.end());
  return out;
}

TEST(MockDeterminism, IndependentOfConcurrency) {
  EXPECT_EQ(mock_content(1), mock_content(8));
}

TEST_F(OrchestratorTest, TranslationsAreAppendOnly) {
  orch.register_backend(mock_backend("m"));
  orch.translate({"c", 1}, "m", "appendix-1");
  EXPECT_THROW(db.exec("UPDATE translations SET output_text = 'x'"), Error);
  EXPECT_THROW(db.exec("DELETE FROM translations"), Error);
  orch.translate({"c", 1}, "m", "appendix-1");
  EXPECT_EQ(orch.records(MessageKey{"c", 1}).size(), 2u);
}

TEST_F(OrchestratorTest, BestPickReplacementAndValidation) {
  orch.register_backend(mock_backend("a"));
  orch.register_backend(mock_backend("b"));
  const auto ra = orch.translate({"c", 1}, "a", "appendix-1");
  const auto rb = orch.translate({"c", 1}, "b", "appendix-1");
  const auto other = orch.translate({"c", 2}, "a", "appendix-1");

  orch.record_best_pick({"c", 1}, ra.record_id, "expert");
  EXPECT_EQ(orch.best_pick({"c", 1}, "expert")->record_id, ra.record_id);
  orch.record_best_pick({"c", 1}, rb.record_id, "expert");
  EXPECT_EQ(orch.best_pick({"c", 1}, "expert")->record_id, rb.record_id);
  EXPECT_EQ(orch.best_picks("expert").size(), 1u);

  EXPECT_THROW(orch.record_best_pick({"c", 1}, other.record_id, "expert"), InvalidPick);
  EXPECT_THROW(orch.record_best_pick({"c", 1}, 9999, "expert"), NotFound);

  FakeVendor vendor({{400, R"({"error":{"code":"content_policy_violation"}})"}});
  orch.register_backend(http_backend("h", vendor.url()));
  const auto refused = orch.translate({"c", 1}, "h", "appendix-1");
  EXPECT_THROW(orch.record_best_pick({"c", 1}, refused.record_id, "expert"), InvalidPick);
}

TEST_F(OrchestratorTest, TallyIdentifiesBestBackend) {
  orch.register_backend(mock_backend("a"));
  orch.register_backend(mock_backend("b"));
  std::vector<MessageKey> keys;
  for (int i = 1; i <= 100; ++i) keys.push_back({"c", i});
  orch.translate_batch(keys, {"a", "b"}, "appendix-1", 4);
  for (int i = 1; i <= 100; ++i) {
    const auto pick = orch.records(MessageKey{"c", i}, i % 4 == 0 ? "a" : "b");
    orch.record_best_pick({"c", i}, pick.at(0).record_id, "expert");
  }
  const auto tally = orch.pick_tally();
  EXPECT_EQ(tally.at("a"), 25u);
  EXPECT_EQ(tally.at("b"), 75u);
  EXPECT_EQ(best_backend(tally), "b");
}

TEST_F(OrchestratorTest, PromptVersions) {
  const auto v1 = orch.register_prompt({"p", "first", ""});
  EXPECT_EQ(orch.register_prompt({"p", "first", ""}).content_hash, v1.content_hash);
  const auto v2 = orch.register_prompt({"p", "second", ""});
  EXPECT_NE(v1.content_hash, v2.content_hash);
  EXPECT_EQ(orch.prompt("p").text, "second");
  EXPECT_THROW(orch.register_prompt({"p", "third", v1.content_hash}), InvalidInput);
}

std::string dump_database(Database& db) {
  std::string out;
  auto tables = db.prepare("SELECT name FROM sqlite_master WHERE type = 'table'");
  while (tables.step()) {
    const auto table = tables.text(0);
    auto rows = db.prepare("SELECT * FROM \"" + table + "\"");
    while (rows.step()) {
      for (int col = 0; col < rows.column_count(); ++col) {
        if (rows.is_null(col)) continue;
        out += rows.text(col);
        out += '\x1f';
      }
      out += '\n';
    }
  }
  return out;
}

TEST_F(OrchestratorTest, SecretNeverPersistedOrLogged) {
  std::ostringstream log;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log);
  auto logger = std::make_shared<spdlog::logger>("scan", sink);
  logger->set_level(spdlog::level::trace);
  const auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);

  FakeVendor vendor({{200, completion("ok")},
                     {400, R"({"error":{"code":"content_policy_violation"}})"},
                     {500, "{}"},
                     {429, "{}", "0"},
                     {401, R"({"error":{"code":"invalid_api_key"}})"}});
  orch.register_backend(http_backend("h", vendor.url()));
  for (int i = 1; i <= 5; ++i) orch.translate({"c", i}, "h", "appendix-1");
  spdlog::set_default_logger(previous);

  ASSERT_EQ(vendor.received().front().authorization, std::string("Bearer ") + kSecret);
  const auto stored = dump_database(db);
  EXPECT_FALSE(stored.empty());
  EXPECT_EQ(stored.find(kSecret), std::string::npos);
  EXPECT_EQ(stored.find("sk-test"), std::string::npos);
  EXPECT_FALSE(log.str().empty());
  EXPECT_EQ(log.str().find(kSecret), std::string::npos);
  EXPECT_NE(stored.find(kSecretVar), std::string::npos);
}

TEST(ConfigTest, ShippedExampleLoads) {
  const auto config = load_config(std::string(MTKIT_SOURCE_DIR) + "/config/mtkit.example.json");
  EXPECT_EQ(config.version, 1);
  ASSERT_EQ(config.prompts.size(), 3u);
  EXPECT_EQ(config.prompts[0].text, std::string(default_prompt_text()));
  EXPECT_FALSE(config.prompts[1].text);
  EXPECT_FALSE(config.prompts[2].text);
  const auto mock = std::find_if(config.backends.begin(), config.backends.end(),
                                 [](const auto& b) { return b.kind == BackendKind::kMockDictionary; });
  ASSERT_NE(mock, config.backends.end());
  EXPECT_EQ(mock->dictionary.at("Мы"), "We");

  Database db(":memory:");
  Orchestrator orch(db);
  EXPECT_EQ(orch.apply_config(config).size(), config.backends.size());
  EXPECT_TRUE(orch.apply_config(config).empty());
  EXPECT_THROW(orch.prompt("gpt4-prompt-1"), NotFound);
  EXPECT_EQ(orch.prompt("appendix-1").content_hash, default_prompt().content_hash);
}

TEST(ConfigTest, BackendJsonRoundTrip) {
  auto c = http_backend("h", "https://api.example.com/v1/chat/completions");
  c.extra = {{"top_p", "1"}};
  c.http.refusal_markers = {"blocked"};
  const auto back = backend_from_json(backend_to_json(c));
  EXPECT_EQ(backend_to_json(back), backend_to_json(c));
}

}  // namespace
}  // namespace mtkit::orchestrator
