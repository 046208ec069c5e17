#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/common/store.hpp"

namespace mtkit::evalharness {

enum class Position { kA, kB };

std::string_view to_string(Position position);
Position parse_position(std::string_view name);

// Identifiers of the two systems being compared. They live only in the
// hidden map and never leave the server unless an analysis asks for them.
struct ModelIds {
  std::string base = "base";
  std::string finetuned = "finetuned";
};

struct QuestionInput {
  std::string source;
  std::string base_translation;
  std::string finetuned_translation;
};

struct SurveyQuestion {
  std::string question_id;
  std::string survey_id;
  std::int64_t order_index = 0;
  std::string source_text;
  std::string option_a_text;
  std::string option_b_text;
  // Hidden map: which model produced each option.
  std::string model_a;
  std::string model_b;
  // Set when both options read the same; such questions are still served.
  bool indistinguishable = false;

  const std::string& model_at(Position p) const { return p == Position::kA ? model_a : model_b; }
};

// One Bernoulli(0.5) draw per question decides whether the fine-tuned
// translation goes to position a. Question ids are "<survey_id>-q<index>".
// Throws InvalidInput for an empty list or an empty translation.
std::vector<SurveyQuestion> generate_survey(std::span<const QuestionInput> questions,
                                            std::uint64_t seed, const std::string& survey_id,
                                            const ModelIds& models = {});

enum class EnglishLevel { kA1A2, kB1B2, kC1C2 };
enum class CyberLevel { kBeginner, kIntermediate, kAdvanced, kExpert };

std::string_view to_string(EnglishLevel level);
std::string_view to_string(CyberLevel level);
// Accept "A1A2", "A1/A2", "a1a2" and the like. Throw InvalidInput.
EnglishLevel parse_english_level(std::string_view name);
CyberLevel parse_cyber_level(std::string_view name);

struct RespondentProfile {
  std::string respondent_id;
  EnglishLevel english_level = EnglishLevel::kB1B2;
  CyberLevel cyber_level = CyberLevel::kBeginner;
  bool consented = false;
};

struct VoteRecord {
  std::int64_t vote_id = 0;
  std::string respondent_id;
  std::string question_id;
  Position chosen_position = Position::kA;
  std::string captured_at;
  // Filled by unblinding during analysis, never at capture.
  std::optional<std::string> resolved_model;
};

// Persistence for surveys, respondents and votes.
class SurveyStore {
 public:
  explicit SurveyStore(Database& db) : db_(db) {}

  // Throws ConflictError when the survey id is already taken.
  void save_survey(const std::vector<SurveyQuestion>& questions);
  // Ordered by order_index; empty for an unknown survey.
  std::vector<SurveyQuestion> questions(const std::string& survey_id);
  std::optional<SurveyQuestion> question(const std::string& question_id);
  std::map<std::string, SurveyQuestion> all_questions();
  std::vector<std::string> surveys();

  // Mints an opaque random respondent id.
  RespondentProfile create_respondent(EnglishLevel english, CyberLevel cyber, bool consented);
  void grant_consent(const std::string& respondent_id);
  // Throws NotFound.
  RespondentProfile respondent(const std::string& respondent_id);

  // Throws NotFound for an unknown respondent or question, ConsentError
  // when the respondent has not consented and ConflictError for a second
  // vote on the same question.
  VoteRecord record_vote(const std::string& respondent_id, const std::string& question_id,
                         Position chosen);
  // Insertion order; optionally only votes on one survey's questions.
  std::vector<VoteRecord> votes(const std::optional<std::string>& survey_id = std::nullopt);

  // One JSON object per vote and line. With unblind set each line also
  // carries the resolved model.
  std::size_t export_votes(std::ostream& out, const std::optional<std::string>& survey_id,
                           bool unblind);

 private:
  Database& db_;
};

}  // namespace mtkit::evalharness
