#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/evalharness/survey.hpp"

namespace mtkit::evalharness {

enum class Clusters { kRespondent, kQuestion, kBoth };

std::string_view to_string(Clusters clusters);
Clusters parse_clusters(std::string_view name);

struct PreferenceAnalysis {
  std::size_t n_votes = 0;
  std::size_t n_pref_finetuned = 0;
  std::size_t n_respondents = 0;
  std::size_t n_questions = 0;
  double proportion = 0.0;
  double exact_binomial_p_two_sided = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t bootstrap_reps = 0;
  Clusters clusters = Clusters::kBoth;
  std::uint64_t seed = 0;
  // Votes with resolved_model filled in.
  std::vector<VoteRecord> unblinded;
};

// Two-sided exact binomial test of k successes in n trials against p = 0.5:
// the total probability of outcomes no more likely than k.
double binomial_two_sided_p(std::size_t n, std::size_t k);

// Percentile (type 7, linear interpolation) of sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

// Unblinds each vote through its question's hidden map, then reports the
// share of votes for the fine-tuned model, the exact binomial p against
// 0.5 and a 95% percentile interval from a cluster bootstrap. Clusters are
// resampled with replacement; with kBoth respondents and questions are
// resampled independently and each vote is weighted by the product of the
// two draw counts. Throws InvalidInput for no votes and AnalysisError
// listing votes whose question is unknown.
PreferenceAnalysis analyze_preferences(std::span<const VoteRecord> votes,
                                       const std::map<std::string, SurveyQuestion>& questions,
                                       Clusters clusters, std::size_t bootstrap_reps,
                                       std::uint64_t seed, const ModelIds& models = {});

std::string render_analysis(const PreferenceAnalysis& analysis);
std::string analysis_json(const PreferenceAnalysis& analysis);

}  // namespace mtkit::evalharness
