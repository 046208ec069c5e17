#include "mtkit/evalharness/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mtkit/common/errors.hpp"
#include "mtkit/common/random.hpp"

namespace mtkit::evalharness {
namespace {

constexpr std::string_view kMethodNote =
    "Significance: exact two-sided binomial test against 0.5 and a cluster bootstrap "
    "percentile interval. No mixed-effects model is fitted.";

struct Indexed {
  std::size_t respondent = 0;
  std::size_t question = 0;
  int pref = 0;
};

double log_pmf(std::size_t n, std::size_t i) {
  const auto dn = static_cast<double>(n);
  const auto di = static_cast<double>(i);
  return std::lgamma(dn + 1.0) - std::lgamma(di + 1.0) - std::lgamma(dn - di + 1.0) -
         dn * std::log(2.0);
}

// Resamples one cluster level: each replicate draws as many clusters as
// there are, with replacement, and pools their votes.
std::vector<double> one_way(const std::vector<Indexed>& votes, std::size_t n_clusters,
                            bool by_respondent, std::size_t reps, SeededRng& rng) {
  std::vector<double> total(n_clusters, 0.0), prefs(n_clusters, 0.0);
  for (const auto& v : votes) {
    const auto c = by_respondent ? v.respondent : v.question;
    total[c] += 1.0;
    prefs[c] += v.pref;
  }
  std::vector<double> out;
  out.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    double n = 0.0, k = 0.0;
    for (std::size_t i = 0; i < n_clusters; ++i) {
      const auto c = static_cast<std::size_t>(rng.uniform_index(n_clusters));
      n += total[c];
      k += prefs[c];
    }
    out.push_back(k / n);
  }
  return out;
}

std::vector<double> two_way(const std::vector<Indexed>& votes, std::size_t n_respondents,
                            std::size_t n_questions, std::size_t reps, SeededRng& rng) {
  std::vector<double> out;
  out.reserve(reps);
  std::vector<double> cr(n_respondents), cq(n_questions);
  for (std::size_t r = 0; r < reps; ++r) {
    // A draw can miss every answered (respondent, question) pair when the
    // design is sparse; such draws are repeated.
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000)
        throw AnalysisError("two-way bootstrap keeps drawing empty resamples", {});
      std::fill(cr.begin(), cr.end(), 0.0);
      std::fill(cq.begin(), cq.end(), 0.0);
      for (std::size_t i = 0; i < n_respondents; ++i) cr[rng.uniform_index(n_respondents)] += 1.0;
      for (std::size_t i = 0; i < n_questions; ++i) cq[rng.uniform_index(n_questions)] += 1.0;
      double n = 0.0, k = 0.0;
      for (const auto& v : votes) {
        const double w = cr[v.respondent] * cq[v.question];
        n += w;
        k += w * v.pref;
      }
      if (n > 0.0) {
        out.push_back(k / n);
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Clusters clusters) {
  switch (clusters) {
    case Clusters::kRespondent: return "respondent";
    case Clusters::kQuestion: return "question";
    case Clusters::kBoth: return "both";
  }
  return "both";
}

Clusters parse_clusters(std::string_view name) {
  for (auto c : {Clusters::kRespondent, Clusters::kQuestion, Clusters::kBoth})
    if (to_string(c) == name) return c;
  throw InvalidInput(fmt::format("clusters must be respondent, question or both, got '{}'", name));
}

double binomial_two_sided_p(std::size_t n, std::size_t k) {
  if (k > n) throw InvalidInput("k exceeds n");
  if (n == 0) return 1.0;
  // Same tolerance as R's binom.test for outcomes tying with the observed one.
  const double observed = log_pmf(n, k) + std::log1p(1e-7);
  double p = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double lp = log_pmf(n, i);
    if (lp <= observed) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

PreferenceAnalysis analyze_preferences(std::span<const VoteRecord> votes,
                                       const std::map<std::string, SurveyQuestion>& questions,
                                       Clusters clusters, std::size_t bootstrap_reps,
                                       std::uint64_t seed, const ModelIds& models) {
  if (votes.empty()) throw InvalidInput("no votes to analyze");
  if (bootstrap_reps == 0) throw InvalidInput("bootstrap needs at least one replicate");

  std::vector<std::string> offenders;
  for (const auto& v : votes)
    if (!questions.contains(v.question_id))
      offenders.push_back(fmt::format("vote {} -> {}", v.vote_id, v.question_id));
  if (!offenders.empty())
    throw AnalysisError(fmt::format("{} votes reference unknown questions", offenders.size()),
                        std::move(offenders));

  PreferenceAnalysis a;
  a.clusters = clusters;
  a.bootstrap_reps = bootstrap_reps;
  a.seed = seed;
  a.n_votes = votes.size();

  std::set<std::string> respondent_set, question_set;
  for (const auto& v : votes) {
    respondent_set.insert(v.respondent_id);
    question_set.insert(v.question_id);
  }
  const std::vector<std::string> respondents(respondent_set.begin(), respondent_set.end());
  const std::vector<std::string> question_ids(question_set.begin(), question_set.end());
  a.n_respondents = respondents.size();
  a.n_questions = question_ids.size();

  std::vector<Indexed> indexed;
  indexed.reserve(votes.size());
  for (const auto& v : votes) {
    auto resolved = v;
    resolved.resolved_model = questions.at(v.question_id).model_at(v.chosen_position);
    const int pref = *resolved.resolved_model == models.finetuned ? 1 : 0;
    a.n_pref_finetuned += static_cast<std::size_t>(pref);
    indexed.push_back(
        {static_cast<std::size_t>(std::lower_bound(respondents.begin(), respondents.end(),
                                                   v.respondent_id) - respondents.begin()),
         static_cast<std::size_t>(std::lower_bound(question_ids.begin(), question_ids.end(),
                                                   v.question_id) - question_ids.begin()),
         pref});
    a.unblinded.push_back(std::move(resolved));
  }
  a.proportion = static_cast<double>(a.n_pref_finetuned) / static_cast<double>(a.n_votes);
  a.exact_binomial_p_two_sided = binomial_two_sided_p(a.n_votes, a.n_pref_finetuned);

  SeededRng rng(seed);
  std::vector<double> reps;
  switch (clusters) {
    case Clusters::kRespondent:
      reps = one_way(indexed, a.n_respondents, true, bootstrap_reps, rng);
      break;
    case Clusters::kQuestion:
      reps = one_way(indexed, a.n_questions, false, bootstrap_reps, rng);
      break;
    case Clusters::kBoth:
      reps = two_way(indexed, a.n_respondents, a.n_questions, bootstrap_reps, rng);
      break;
  }
  std::sort(reps.begin(), reps.end());
  a.ci_low = std::clamp(quantile_sorted(reps, 0.025), 0.0, 1.0);
  a.ci_high = std::clamp(quantile_sorted(reps, 0.975), 0.0, 1.0);
  return a;
}

std::string render_analysis(const PreferenceAnalysis& a) {
  return fmt::format(
      "votes: {} from {} respondents over {} questions\n"
      "preferred fine-tuned: {} ({:.2f}%)\n"
      "exact binomial p (two-sided, H0 = 0.5): {:.6g}\n"
      "95% cluster bootstrap CI ({}, {} reps, seed {}): [{:.4f}, {:.4f}]\n"
      "{}\n",
      a.n_votes, a.n_respondents, a.n_questions, a.n_pref_finetuned, 100.0 * a.proportion,
      a.exact_binomial_p_two_sided, to_string(a.clusters), a.bootstrap_reps, a.seed, a.ci_low,
      a.ci_high, kMethodNote);
}

std::string analysis_json(const PreferenceAnalysis& a) {
  nlohmann::ordered_json j;
  j["n_votes"] = a.n_votes;
  j["n_pref_finetuned"] = a.n_pref_finetuned;
  j["n_respondents"] = a.n_respondents;
  j["n_questions"] = a.n_questions;
  j["proportion"] = a.proportion;
  j["exact_binomial_p_two_sided"] = a.exact_binomial_p_two_sided;
  j["bootstrap_ci_95"] = {a.ci_low, a.ci_high};
  j["bootstrap_reps"] = a.bootstrap_reps;
  j["clusters"] = to_string(a.clusters);
  j["seed"] = a.seed;
  j["method"] = kMethodNote;
  return j.dump();
}

}  // namespace mtkit::evalharness
