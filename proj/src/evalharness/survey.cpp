#include "mtkit/evalharness/survey.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mtkit/common/digest.hpp"
#include "mtkit/common/errors.hpp"
#include "mtkit/common/random.hpp"

namespace mtkit::evalharness {
namespace {

std::string normalize_level(std::string_view name) {
  std::string out;
  for (const char c : name)
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

constexpr std::string_view kQuestionColumns =
    "question_id, survey_id, order_index, source_text, option_a_text, option_b_text, "
    "model_a, model_b, indistinguishable";

SurveyQuestion read_question(Statement& st) {
  SurveyQuestion q;
  q.question_id = st.text(0);
  q.survey_id = st.text(1);
  q.order_index = st.int64(2);
  q.source_text = st.text(3);
  q.option_a_text = st.text(4);
  q.option_b_text = st.text(5);
  q.model_a = st.text(6);
  q.model_b = st.text(7);
  q.indistinguishable = st.int64(8) != 0;
  return q;
}

VoteRecord read_vote(Statement& st) {
  VoteRecord v;
  v.vote_id = st.int64(0);
  v.respondent_id = st.text(1);
  v.question_id = st.text(2);
  v.chosen_position = parse_position(st.text(3));
  v.captured_at = st.text(4);
  return v;
}

}  // namespace

std::string_view to_string(Position position) { return position == Position::kA ? "a" : "b"; }

Position parse_position(std::string_view name) {
  if (name == "a" || name == "A") return Position::kA;
  if (name == "b" || name == "B") return Position::kB;
  throw InvalidInput(fmt::format("position must be 'a' or 'b', got '{}'", name));
}

std::vector<SurveyQuestion> generate_survey(std::span<const QuestionInput> questions,
                                            std::uint64_t seed, const std::string& survey_id,
                                            const ModelIds& models) {
  if (questions.empty()) throw InvalidInput("a survey needs at least one question");
  if (survey_id.empty()) throw InvalidInput("survey id must not be empty");
  if (models.base.empty() || models.finetuned.empty() || models.base == models.finetuned)
    throw InvalidInput("the two model ids must be distinct and nonempty");
  SeededRng rng(seed);
  std::vector<SurveyQuestion> out;
  out.reserve(questions.size());
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& in = questions[i];
    if (in.base_translation.empty() || in.finetuned_translation.empty())
      throw InvalidInput(fmt::format("question {} has an empty translation", i));
    SurveyQuestion q;
    q.survey_id = survey_id;
    q.order_index = static_cast<std::int64_t>(i);
    q.question_id = fmt::format("{}-q{}", survey_id, i);
    q.source_text = in.source;
    if (rng.fair_coin()) {
      q.option_a_text = in.finetuned_translation;
      q.option_b_text = in.base_translation;
      q.model_a = models.finetuned;
      q.model_b = models.base;
    } else {
      q.option_a_text = in.base_translation;
      q.option_b_text = in.finetuned_translation;
      q.model_a = models.base;
      q.model_b = models.finetuned;
    }
    q.indistinguishable = q.option_a_text == q.option_b_text;
    out.push_back(std::move(q));
  }
  return out;
}

std::string_view to_string(EnglishLevel level) {
  switch (level) {
    case EnglishLevel::kA1A2: return "A1A2";
    case EnglishLevel::kB1B2: return "B1B2";
    case EnglishLevel::kC1C2: return "C1C2";
  }
  return "B1B2";
}

std::string_view to_string(CyberLevel level) {
  switch (level) {
    case CyberLevel::kBeginner: return "beginner";
    case CyberLevel::kIntermediate: return "intermediate";
    case CyberLevel::kAdvanced: return "advanced";
    case CyberLevel::kExpert: return "expert";
  }
  return "beginner";
}

EnglishLevel parse_english_level(std::string_view name) {
  const auto n = normalize_level(name);
  if (n == "a1a2") return EnglishLevel::kA1A2;
  if (n == "b1b2") return EnglishLevel::kB1B2;
  if (n == "c1c2") return EnglishLevel::kC1C2;
  throw InvalidInput(fmt::format("unknown English level '{}'", name));
}

CyberLevel parse_cyber_level(std::string_view name) {
  const auto n = normalize_level(name);
  for (auto level : {CyberLevel::kBeginner, CyberLevel::kIntermediate, CyberLevel::kAdvanced,
                     CyberLevel::kExpert})
    if (n == to_string(level)) return level;
  throw InvalidInput(fmt::format("unknown cybersecurity level '{}'", name));
}

void SurveyStore::save_survey(const std::vector<SurveyQuestion>& questions) {
  if (questions.empty()) throw InvalidInput("nothing to save");
  Database::Transaction tx(db_);
  auto exists = db_.prepare("SELECT 1 FROM survey_questions WHERE survey_id = ?1 LIMIT 1");
  exists.bind(1, questions.front().survey_id);
  if (exists.step())
    throw ConflictError(fmt::format("survey '{}' already exists", questions.front().survey_id));
  auto st = db_.prepare(fmt::format(
      "INSERT INTO survey_questions ({}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
      kQuestionColumns));
  for (const auto& q : questions) {
    st.bind(1, q.question_id)
        .bind(2, q.survey_id)
        .bind(3, q.order_index)
        .bind(4, q.source_text)
        .bind(5, q.option_a_text)
        .bind(6, q.option_b_text)
        .bind(7, q.model_a)
        .bind(8, q.model_b)
        .bind(9, q.indistinguishable ? 1 : 0);
    try {
      st.run();
    } catch (const std::exception& e) {
      if (is_constraint_violation(e))
        throw ConflictError(fmt::format("question '{}' already exists", q.question_id));
      throw;
    }
  }
  tx.commit();
}

std::vector<SurveyQuestion> SurveyStore::questions(const std::string& survey_id) {
  auto st = db_.prepare(fmt::format(
      "SELECT {} FROM survey_questions WHERE survey_id = ?1 ORDER BY order_index",
      kQuestionColumns));
  st.bind(1, survey_id);
  std::vector<SurveyQuestion> out;
  while (st.step()) out.push_back(read_question(st));
  return out;
}

std::optional<SurveyQuestion> SurveyStore::question(const std::string& question_id) {
  auto st = db_.prepare(
      fmt::format("SELECT {} FROM survey_questions WHERE question_id = ?1", kQuestionColumns));
  st.bind(1, question_id);
  if (!st.step()) return std::nullopt;
  return read_question(st);
}

std::map<std::string, SurveyQuestion> SurveyStore::all_questions() {
  auto st = db_.prepare(fmt::format("SELECT {} FROM survey_questions", kQuestionColumns));
  std::map<std::string, SurveyQuestion> out;
  while (st.step()) {
    auto q = read_question(st);
    auto id = q.question_id;
    out.emplace(std::move(id), std::move(q));
  }
  return out;
}

std::vector<std::string> SurveyStore::surveys() {
  auto st = db_.prepare("SELECT DISTINCT survey_id FROM survey_questions ORDER BY survey_id");
  std::vector<std::string> out;
  while (st.step()) out.push_back(st.text(0));
  return out;
}

RespondentProfile SurveyStore::create_respondent(EnglishLevel english, CyberLevel cyber,
                                                 bool consented) {
  RespondentProfile p{random_token(), english, cyber, consented};
  Database::Transaction tx(db_);
  auto st = db_.prepare(
      "INSERT INTO respondents (respondent_id, english_level, cyber_level, consented, "
      "created_at) VALUES (?1, ?2, ?3, ?4, ?5)");
  st.bind(1, p.respondent_id)
      .bind(2, to_string(english))
      .bind(3, to_string(cyber))
      .bind(4, consented ? 1 : 0)
      .bind(5, utc_now_iso8601());
  st.run();
  tx.commit();
  return p;
}

void SurveyStore::grant_consent(const std::string& respondent_id) {
  Database::Transaction tx(db_);
  respondent(respondent_id);
  auto st = db_.prepare("UPDATE respondents SET consented = 1 WHERE respondent_id = ?1");
  st.bind(1, respondent_id);
  st.run();
  tx.commit();
}

RespondentProfile SurveyStore::respondent(const std::string& respondent_id) {
  auto st = db_.prepare(
      "SELECT english_level, cyber_level, consented FROM respondents WHERE respondent_id = ?1");
  st.bind(1, respondent_id);
  if (!st.step()) throw NotFound("unknown respondent");
  return {respondent_id, parse_english_level(st.text(0)), parse_cyber_level(st.text(1)),
          st.int64(2) != 0};
}

VoteRecord SurveyStore::record_vote(const std::string& respondent_id,
                                    const std::string& question_id, Position chosen) {
  Database::Transaction tx(db_);
  if (!respondent(respondent_id).consented)
    throw ConsentError("respondent has not consented");
  if (!question(question_id)) throw NotFound(fmt::format("unknown question '{}'", question_id));
  VoteRecord v;
  v.respondent_id = respondent_id;
  v.question_id = question_id;
  v.chosen_position = chosen;
  v.captured_at = utc_now_iso8601();
  auto st = db_.prepare(
      "INSERT INTO votes (respondent_id, question_id, chosen_position, captured_at) "
      "VALUES (?1, ?2, ?3, ?4)");
  st.bind(1, respondent_id).bind(2, question_id).bind(3, to_string(chosen)).bind(4, v.captured_at);
  try {
    st.run();
  } catch (const std::exception& e) {
    if (is_constraint_violation(e))
      throw ConflictError(fmt::format("question '{}' already answered", question_id));
    throw;
  }
  v.vote_id = db_.last_insert_rowid();
  tx.commit();
  return v;
}

std::vector<VoteRecord> SurveyStore::votes(const std::optional<std::string>& survey_id) {
  auto st = db_.prepare(
      "SELECT v.vote_id, v.respondent_id, v.question_id, v.chosen_position, v.captured_at "
      "FROM votes v LEFT JOIN survey_questions q ON q.question_id = v.question_id "
      "WHERE ?1 IS NULL OR q.survey_id = ?1 ORDER BY v.vote_id");
  st.bind(1, survey_id);
  std::vector<VoteRecord> out;
  while (st.step()) out.push_back(read_vote(st));
  return out;
}

std::size_t SurveyStore::export_votes(std::ostream& out, const std::optional<std::string>& survey_id,
                                      bool unblind) {
  const auto all = votes(survey_id);
  const auto qs = unblind ? all_questions() : std::map<std::string, SurveyQuestion>{};
  for (const auto& v : all) {
    nlohmann::ordered_json line;
    line["vote_id"] = v.vote_id;
    line["respondent_id"] = v.respondent_id;
    line["question_id"] = v.question_id;
    line["chosen_position"] = to_string(v.chosen_position);
    line["captured_at"] = v.captured_at;
    if (unblind) {
      const auto it = qs.find(v.question_id);
      line["resolved_model"] =
          it == qs.end() ? nlohmann::ordered_json() : nlohmann::ordered_json(it->second.model_at(v.chosen_position));
    }
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("vote export write failed");
  return all.size();
}

}  // namespace mtkit::evalharness
