#include "mtkit/metrics/evaluate.hpp"

#include <fmt/format.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "mtkit/common/errors.hpp"

namespace mtkit::metrics {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kBleu: return "bleu";
    case Metric::kMeteor: return "meteor";
    case Metric::kTer: return "ter";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) {
  if (name == "bleu") return Metric::kBleu;
  if (name == "meteor") return Metric::kMeteor;
  if (name == "ter") return Metric::kTer;
  return std::nullopt;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (const double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (const double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::string format_mean_std(double mean, double std) {
  return fmt::format("{:.4f} ± {:.4f}", mean, std);
}

namespace {

struct Scored {
  double value = 0.0;
  MetricBreakdown breakdown;
};

Scored score_one(Metric metric, const TokenSequence& cand,
                 const TokenSequence& ref, const EvaluationOptions& opt) {
  switch (metric) {
    case Metric::kBleu: {
      auto r = bleu(cand, std::span(&ref, 1), opt.bleu);
      return {r.score, r.breakdown};
    }
    case Metric::kMeteor: {
      auto r = meteor(cand, ref, opt.meteor);
      return {r.score, r.breakdown};
    }
    case Metric::kTer: {
      auto r = ter(cand, ref, opt.ter);
      return {r.score, r.breakdown};
    }
  }
  throw InvalidInput("unknown metric");
}

}  // namespace

SystemEvaluation evaluate_system(std::span<const SentencePair> pairs,
                                 std::span<const Metric> metrics,
                                 const EvaluationOptions& options) {
  if (pairs.empty()) throw InvalidInput("evaluate_system: no sentence pairs");
  SystemEvaluation eval;
  eval.pairs = pairs.size();

  std::vector<TokenSequence> cands, refs;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    TokenSequence ref = tokenize(pairs[i].reference, options.casing);
    if (ref.empty()) {
      eval.excluded.push_back(i);
      continue;
    }
    cands.push_back(tokenize(pairs[i].candidate, options.casing));
    refs.push_back(std::move(ref));
    kept.push_back(i);
  }

  for (const Metric metric : metrics) {
    std::vector<Scored> slots(cands.size());
    const std::size_t threads =
        std::max<std::size_t>(1, std::min(options.threads, slots.size()));
    auto work = [&](std::size_t t) {
      for (std::size_t i = t; i < slots.size(); i += threads)
        slots[i] = score_one(metric, cands[i], refs[i], options);
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }

    MetricScore score;
    score.metric = metric;
    for (auto& s : slots) {
      score.per_sentence.push_back(s.value);
      score.breakdowns.push_back(std::move(s.breakdown));
    }
    const MeanStd ms = mean_std(score.per_sentence);
    score.mean = ms.mean;
    score.std = ms.std;
    eval.scores[metric] = std::move(score);
  }
  return eval;
}

std::string render_table(const SystemEvaluation& evaluation) {
  std::string out = fmt::format("{:<8} {}\n", "Metric", "mean ± std");
  for (const auto& [metric, score] : evaluation.scores) {
    std::string name(to_string(metric));
    for (auto& c : name) c = static_cast<char>(std::toupper(c));
    out += fmt::format("{:<8} {}\n", name, format_mean_std(score.mean, score.std));
  }
  out += fmt::format("pairs: {}, excluded (empty reference): {}\n",
                     evaluation.pairs, evaluation.excluded.size());
  return out;
}

std::string render_jsonl(const SystemEvaluation& evaluation) {
  std::string out;
  for (const auto& [metric, score] : evaluation.scores) {
    nlohmann::ordered_json row;
    row["metric"] = to_string(metric);
    row["mean"] = score.mean;
    row["std"] = score.std;
    row["formatted"] = format_mean_std(score.mean, score.std);
    row["n"] = score.per_sentence.size();
    row["excluded"] = evaluation.excluded;
    row["per_sentence"] = score.per_sentence;
    out += row.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mtkit::metrics
