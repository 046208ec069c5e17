#include <fstream>
#include <memory>
#include <thread>

#include <fmt/core.h>

#include "commands.hpp"
#include "mtkit/common/errors.hpp"
#include "mtkit/metrics/evaluate.hpp"

namespace mtkit::cli {
namespace {

struct MetricsArgs {
  std::string hyp;
  std::string ref;
  std::vector<std::string> metrics{"bleu", "meteor", "ter"};
  std::string report = "table";
  bool fold_case = false;
  bool no_smoothing = false;
  bool stem = false;
  std::size_t threads = 0;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path, 0);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

int eval(const MetricsArgs& a) {
  const auto hyp = read_lines(a.hyp);
  const auto ref = read_lines(a.ref);
  if (hyp.size() != ref.size())
    throw InvalidInput(fmt::format("{} hypothesis lines but {} reference lines", hyp.size(), ref.size()));

  std::vector<metrics::Metric> wanted;
  for (const auto& name : a.metrics) {
    const auto m = metrics::parse_metric(name);
    if (!m) throw InvalidInput("unknown metric " + name);
    wanted.push_back(*m);
  }
  std::vector<metrics::SentencePair> pairs;
  for (std::size_t i = 0; i < hyp.size(); ++i) pairs.push_back({hyp[i], ref[i]});

  metrics::EvaluationOptions options;
  options.casing = a.fold_case ? metrics::Casing::kFolded : metrics::Casing::kPreserved;
  if (a.no_smoothing) options.bleu.smoothing = metrics::BleuSmoothing::kNone;
  options.meteor.stem = a.stem;
  options.threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());

  const auto result = metrics::evaluate_system(pairs, wanted, options);
  if (!result.excluded.empty())
    fmt::print(stderr, "{} pairs skipped: empty reference\n", result.excluded.size());
  fmt::print("{}", a.report == "jsonl" ? metrics::render_jsonl(result) : metrics::render_table(result));
  return 0;
}

}  // namespace

void add_metrics(CLI::App& app, const Globals&, Handler& handler) {
  auto* m = app.add_subcommand("metrics", "Sentence-level BLEU, METEOR and TER");
  m->require_subcommand(1);
  auto args = std::make_shared<MetricsArgs>();

  auto* e = m->add_subcommand("eval", "Score hypothesis lines against reference lines");
  e->add_option("--hyp", args->hyp, "One hypothesis per line")->required()->check(CLI::ExistingFile);
  e->add_option("--ref", args->ref, "One reference per line")->required()->check(CLI::ExistingFile);
  e->add_option("--metrics", args->metrics, "Comma-separated list")->delimiter(',')->capture_default_str();
  e->add_option("--report", args->report, "table or jsonl")
      ->check(CLI::IsMember({"table", "jsonl"}))
      ->capture_default_str();
  e->add_flag("--fold-case", args->fold_case, "Case-insensitive tokens");
  e->add_flag("--no-smoothing", args->no_smoothing, "BLEU without add-epsilon smoothing");
  e->add_flag("--stem", args->stem, "METEOR Porter stem stage");
  e->add_option("--threads", args->threads, "Worker threads (default: hardware)");
  e->callback([&handler, args] { handler = [args] { return eval(*args); }; });
}

}  // namespace mtkit::cli
