#include "mtkit/finetune/finetune.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtkit/common/digest.hpp"
#include "mtkit/common/errors.hpp"

namespace mtkit::finetune {
namespace {

using corpus::GroundTruthEntry;
using corpus::GroundTruthKind;
using corpus::MessageKey;

std::vector<GroundTruthEntry> mixed_truth(int messages, int vocabulary) {
  std::vector<GroundTruthEntry> out;
  for (int i = 1; i <= messages; ++i)
    out.push_back({GroundTruthKind::kMessage, MessageKey{"c", i},
                   "сообщение " + std::to_string(i), "message " + std::to_string(i), "expert"});
  for (int v = 0; v < vocabulary; ++v)
    out.push_back({GroundTruthKind::kVocabulary, std::nullopt, "слово " + std::to_string(v),
                   "word " + std::to_string(v), "expert"});
  return out;
}

std::string serialize(const std::vector<FineTuneRecord>& records) {
  std::ostringstream out;
  serialize_jsonl(records, out);
  return out.str();
}

TEST(PromptTest, DefaultPromptIsTheTranslatorBot) {
  const auto p = default_prompt();
  EXPECT_EQ(p.prompt_id, "appendix-1");
  EXPECT_TRUE(p.text.starts_with("You are a Language Translator Bot specialized in \n"
                                 "translating from Russian to English.\n\n"));
  EXPECT_TRUE(p.text.ends_with("appropriate translations, respecting these \nguidelines."));
  EXPECT_EQ(p.content_hash, sha256_hex(p.text));
  EXPECT_NE(make_prompt("appendix-1", p.text + " ").content_hash, p.content_hash);
}

TEST(BuildTest, OneRecordPerEntryWithPromptAsSystem) {
  const auto truth = mixed_truth(100, 25);
  const auto records = build_finetune_dataset(truth, default_prompt());
  ASSERT_EQ(records.size(), 125u);
  std::set<std::string> systems;
  for (const auto& r : records) systems.insert(r.system_text);
  EXPECT_EQ(systems, std::set<std::string>{std::string(default_prompt_text())});
  EXPECT_EQ(records[0].user_text, "сообщение 1");
  EXPECT_EQ(records[124].origin, Origin::kVocabulary);
}

TEST(BuildTest, VocabularyPair) {
  const std::vector<GroundTruthEntry> truth{
      {GroundTruthKind::kVocabulary, std::nullopt, "айтишник", "person who works in IT", "e"}};
  const auto records = build_finetune_dataset(truth, default_prompt());
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].user_text, "айтишник");
  EXPECT_EQ(records[0].assistant_text, "person who works in IT");
}

TEST(BuildTest, EmptyInputRejected) {
  EXPECT_THROW(build_finetune_dataset({}, default_prompt()), EmptyDataset);
}

TEST(BuildTest, BestPicksAttachedAsProvenance) {
  const auto truth = mixed_truth(2, 1);
  const std::map<MessageKey, std::int64_t> picks{{{"c", 2}, 17}};
  const auto records = build_finetune_dataset(truth, default_prompt(), &picks);
  EXPECT_FALSE(records[0].picked_record);
  EXPECT_EQ(records[1].picked_record, 17);
  EXPECT_FALSE(records[2].picked_record);
}

TEST(SplitTest, EightyTwentyOf125) {
  const auto records = build_finetune_dataset(mixed_truth(100, 25), default_prompt());
  const auto split = split_finetune(records, 0.8, 2024);
  EXPECT_EQ(split.train.size(), 100u);
  EXPECT_EQ(split.validation.size(), 25u);
  for (const auto& r : split.validation) EXPECT_EQ(r.origin, Origin::kMessage);
  std::size_t vocab_in_train = 0;
  for (const auto& r : split.train) vocab_in_train += r.origin == Origin::kVocabulary;
  EXPECT_EQ(vocab_in_train, 25u);
}

TEST(SplitTest, SeededDeterminism) {
  const auto records = build_finetune_dataset(mixed_truth(100, 25), default_prompt());
  const auto a = split_finetune(records, 0.8, 1);
  const auto b = split_finetune(records, 0.8, 1);
  const auto c = split_finetune(records, 0.8, 2);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(c.validation.size(), a.validation.size());
  EXPECT_NE(c.validation, a.validation);
}

TEST(SplitTest, InfeasibleWhenVocabularyOverflowsTrain) {
  const auto records = build_finetune_dataset(mixed_truth(1, 9), default_prompt());
  EXPECT_THROW(split_finetune(records, 0.5, 1), InfeasibleSplit);
  EXPECT_THROW(split_finetune(records, 1.0, 1), InvalidInput);
}

TEST(SplitTest, VocabularyNeverInValidation) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (double f : {0.3, 0.5, 0.7, 0.8, 0.95}) {
      const auto records =
          build_finetune_dataset(mixed_truth(40, 10), default_prompt());
      const auto split = split_finetune(records, f, seed);
      for (const auto& r : split.validation) ASSERT_EQ(r.origin, Origin::kMessage);
      ASSERT_EQ(split.train.size() + split.validation.size(), 50u);
    }
  }
}

TEST(JsonlTest, ExactLineFormat) {
  const std::vector<FineTuneRecord> records{{"sys", "привет «мир» ⚡", "hi", Origin::kMessage, {}}};
  EXPECT_EQ(serialize(records),
            "{\"messages\":[{\"role\":\"system\",\"content\":\"sys\"},"
            "{\"role\":\"user\",\"content\":\"привет «мир» ⚡\"},"
            "{\"role\":\"assistant\",\"content\":\"hi\"}]}\n");
}

TEST(JsonlTest, RoundTripPreservesBytes) {
  std::vector<FineTuneRecord> records{
      {std::string(default_prompt_text()), "Атака ⚡\n\nна «Сегодня» \"кавычки\" \\ tab\t",
       "Attack ⚡\n\non \"Today\"", Origin::kMessage, {}},
      {std::string(default_prompt_text()), "айтишник", "person who works in IT",
       Origin::kMessage, {}}};
  const auto text = serialize(records);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  std::istringstream in(text);
  EXPECT_EQ(parse_jsonl(in), records);
  std::istringstream again(text);
  EXPECT_TRUE(validate_jsonl(again).clean());
}

TEST(JsonlTest, HundredTwentyFiveLines) {
  const auto records = build_finetune_dataset(mixed_truth(100, 25), default_prompt());
  const auto text = serialize(records);
  std::istringstream in(text);
  const auto report = validate_jsonl(in);
  EXPECT_EQ(report.lines, 125u);
  EXPECT_TRUE(report.clean());
}

TEST(JsonlTest, SinkFailureReportsPartialCount) {
  const std::vector<FineTuneRecord> records{{"s", "u", "a", Origin::kMessage, {}},
                                            {"s", "u2", "a", Origin::kMessage, {}}};
  std::ostringstream out;
  out.setstate(std::ios::badbit);
  try {
    serialize_jsonl(records, out);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.bytes_written(), 0u);
  }
}

TEST(ValidateTest, FindingsByLine) {
  const std::string good =
      R"({"messages":[{"role":"system","content":"S"},{"role":"user","content":"u"},{"role":"assistant","content":"a"}]})";
  const std::string missing_assistant =
      R"({"messages":[{"role":"system","content":"S"},{"role":"user","content":"v"}]})";
  const std::string conflicting =
      R"({"messages":[{"role":"system","content":"S"},{"role":"user","content":"u"},{"role":"assistant","content":"b"}]})";
  const std::string other_system =
      R"({"messages":[{"role":"system","content":"T"},{"role":"user","content":"w"},{"role":"assistant","content":""}]})";
  std::istringstream in(good + "\n" + missing_assistant + "\n" + conflicting + "\n" +
                        other_system + "\n{broken\n");
  const auto r = validate_jsonl(in);
  EXPECT_EQ(r.lines, 5u);
  EXPECT_EQ(r.role_errors, std::vector<std::size_t>{2});
  EXPECT_EQ(r.duplicate_user_texts, std::vector<std::size_t>{3});
  EXPECT_EQ(r.inconsistent_system_prompts, std::vector<std::size_t>{4});
  EXPECT_EQ(r.empty_content, std::vector<std::size_t>{4});
  EXPECT_EQ(r.parse_errors, std::vector<std::size_t>{5});
  EXPECT_FALSE(r.clean());
}

TEST(JobTest, RecordsMetadata) {
  Database db(":memory:");
  FineTuneJob job;
  job.base_model = "gpt-3.5-turbo-0125";
  job.file_digest = sha256_hex("file");
  job.result_model = "ft:gpt-3.5-turbo-0125:org::abc";
  job.params = {{"epochs", "3"}};
  const auto row = record_job(db, job);
  const auto jobs = list_jobs(db);
  ASSERT_EQ(jobs.size(), 1u);
  EXPECT_EQ(jobs[0].job_row, row);
  EXPECT_EQ(jobs[0].result_model, job.result_model);
  EXPECT_FALSE(jobs[0].vendor_job_id);
  EXPECT_EQ(jobs[0].params.at("epochs"), "3");
}

}  // namespace
}  // namespace mtkit::finetune
