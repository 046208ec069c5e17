#pragma once

// Synthetic survey: 30 questions, 7 respondents, 103 answers. Three
// respondents answer everything (90 votes) and four leave early after 5, 4,
// 3 and 1 answers. Vote i prefers the fine-tuned model when
// (37 * i) mod 103 < n_finetuned, which spreads the preferences over
// respondents and questions.

#include <string>
#include <vector>

#include "mtkit/evalharness/survey.hpp"

namespace testing_support {

inline const mtkit::evalharness::ModelIds kSurveyModels{"gpt-3.5-turbo-0125",
                                                        "ft:gpt-3.5-turbo-0125:hacktivist"};

inline std::vector<mtkit::evalharness::QuestionInput> survey_inputs(std::size_t n) {
  std::vector<mtkit::evalharness::QuestionInput> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"Сообщение номер " + std::to_string(i) + " ⚡",
                   "Base rendering " + std::to_string(i),
                   "Fine-tuned rendering " + std::to_string(i)});
  return out;
}

// Returns the respondent ids; votes are stored in db.
inline std::vector<std::string> cast_synthetic_votes(mtkit::evalharness::SurveyStore& store,
                                                     const std::string& survey_id,
                                                     std::size_t n_finetuned) {
  using namespace mtkit::evalharness;
  const auto questions = store.questions(survey_id);
  const std::vector<std::size_t> answered{30, 30, 30, 5, 4, 3, 1};
  std::vector<std::string> ids;
  std::size_t vote = 0;
  for (std::size_t r = 0; r < answered.size(); ++r) {
    const auto p = store.create_respondent(EnglishLevel::kC1C2, CyberLevel::kExpert, true);
    ids.push_back(p.respondent_id);
    for (std::size_t q = 0; q < answered[r]; ++q, ++vote) {
      const auto& question = questions.at(q);
      const bool finetuned = (37 * vote) % 103 < n_finetuned;
      const auto& want = finetuned ? kSurveyModels.finetuned : kSurveyModels.base;
      store.record_vote(p.respondent_id, question.question_id,
                        question.model_a == want ? Position::kA : Position::kB);
    }
  }
  return ids;
}

}  // namespace testing_support
