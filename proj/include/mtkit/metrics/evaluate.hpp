#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/metrics/bleu.hpp"
#include "mtkit/metrics/breakdown.hpp"
#include "mtkit/metrics/meteor.hpp"
#include "mtkit/metrics/ter.hpp"
#include "mtkit/metrics/tokenize.hpp"

namespace mtkit::metrics {

enum class Metric { kBleu, kMeteor, kTer };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);

struct MeanStd {
  double mean = 0.0;
  // Sample standard deviation (n - 1); 0 for fewer than two values.
  double std = 0.0;
};

MeanStd mean_std(std::span<const double> values);

// "0.3477 ± 0.0968": four decimals each.
std::string format_mean_std(double mean, double std);

struct MetricScore {
  Metric metric = Metric::kBleu;
  std::vector<double> per_sentence;
  double mean = 0.0;
  double std = 0.0;
  std::vector<MetricBreakdown> breakdowns;
};

struct SentencePair {
  std::string candidate;
  std::string reference;
};

struct EvaluationOptions {
  Casing casing = Casing::kPreserved;
  BleuOptions bleu;
  MeteorOptions meteor;
  TerOptions ter;
  // Sentences are scored independently; results are stored by index so the
  // aggregate does not depend on the thread count.
  std::size_t threads = 1;
};

struct SystemEvaluation {
  std::size_t pairs = 0;
  // Input indices skipped because the reference had no tokens.
  std::vector<std::size_t> excluded;
  std::map<Metric, MetricScore> scores;
};

// Throws InvalidInput on an empty pair list.
SystemEvaluation evaluate_system(std::span<const SentencePair> pairs,
                                 std::span<const Metric> metrics,
                                 const EvaluationOptions& options = {});

// One row per metric, "mean ± std" to four decimals.
std::string render_table(const SystemEvaluation& evaluation);

// One JSON object per metric per line.
std::string render_jsonl(const SystemEvaluation& evaluation);

}  // namespace mtkit::metrics
