#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "mtkit/common/errors.hpp"
#include "mtkit/common/store.hpp"
#include "mtkit/corpus/corpus.hpp"
#include "mtkit/evalharness/analysis.hpp"
#include "mtkit/evalharness/cost.hpp"
#include "mtkit/evalharness/server.hpp"
#include "mtkit/evalharness/survey.hpp"
#include "mtkit/orchestrator/orchestrator.hpp"

namespace mtkit::cli {
namespace {

using namespace evalharness;

struct SurveyArgs {
  std::string survey = "survey";
  std::uint64_t seed = 0;
  std::string input;
  std::string split_name = "default";
  std::string base_backend;
  std::string finetuned_backend;
  std::string base_model;
  std::string finetuned_model;
  std::string addr = "127.0.0.1:8080";
  std::string static_dir;
  bool remote_admin = false;
  std::string clusters = "both";
  std::size_t reps = 10'000;
  bool json = false;
  bool unblind = false;
  std::string out;
};

ModelIds model_ids(const SurveyArgs& a, const ModelIds& fallback) {
  ModelIds m = fallback;
  if (!a.base_model.empty()) m.base = a.base_model;
  if (!a.finetuned_model.empty()) m.finetuned = a.finetuned_model;
  return m;
}

// {"source": ..., "base": ..., "finetuned": ...} per line.
std::vector<QuestionInput> read_inputs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path, 0);
  std::vector<QuestionInput> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("source").get<std::string>(), j.at("base").get<std::string>(),
                     j.at("finetuned").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(fmt::format("{}:{}: {}", path, line_no, e.what()));
    }
  }
  return out;
}

std::string latest_ok(orchestrator::Orchestrator& orch, const corpus::MessageKey& key,
                      const std::string& backend) {
  const auto records = orch.records(key, backend);
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (it->status == orchestrator::TranslationStatus::kOk) return *it->output_text;
  throw NotFound(fmt::format("no ok translation of {} by {}", key.to_string(), backend));
}

// Test messages of the split, each with the latest ok output of both
// backends.
std::vector<QuestionInput> inputs_from_db(Database& db, const SurveyArgs& a) {
  if (a.base_backend.empty() || a.finetuned_backend.empty())
    throw InvalidInput("pass --input or both --base-backend and --finetuned-backend");
  corpus::Corpus store(db);
  orchestrator::Orchestrator orch(db);
  std::vector<QuestionInput> out;
  for (const auto& key : store.load_split(a.split_name).keys(corpus::Assignment::kTest)) {
    const auto msg = store.find(key);
    if (!msg) throw NotFound("message " + key.to_string());
    out.push_back({msg->text, latest_ok(orch, key, a.base_backend),
                   latest_ok(orch, key, a.finetuned_backend)});
  }
  return out;
}

int generate(const Globals& g, const SurveyArgs& a) {
  Database db(g.db_path);
  ModelIds fallback;
  std::vector<QuestionInput> inputs;
  if (!a.input.empty()) {
    inputs = read_inputs(a.input);
  } else {
    inputs = inputs_from_db(db, a);
    fallback = {a.base_backend, a.finetuned_backend};
  }
  const auto questions = generate_survey(inputs, a.seed, a.survey, model_ids(a, fallback));
  SurveyStore(db).save_survey(questions);
  std::size_t same = 0;
  for (const auto& q : questions) same += q.indistinguishable;
  fmt::print("survey {}: {} questions\n", a.survey, questions.size());
  if (same) fmt::print("{} questions have identical options\n", same);
  return 0;
}

int serve(const Globals& g, const SurveyArgs& a) {
  const auto colon = a.addr.rfind(':');
  if (colon == std::string::npos) throw InvalidInput("--addr wants host:port");
  ServerOptions opts;
  opts.host = a.addr.substr(0, colon);
  try {
    opts.port = std::stoi(a.addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw InvalidInput("bad port in " + a.addr);
  }
  if (!a.static_dir.empty()) opts.static_dir = a.static_dir;
  opts.admin_loopback_only = !a.remote_admin;
  opts.models = model_ids(a, {});
  opts.clusters = parse_clusters(a.clusters);
  opts.bootstrap_reps = a.reps;
  opts.seed = a.seed;

  // Signals are taken synchronously so stop() runs on an ordinary thread.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Database db(g.db_path);
  SurveyServer server(db, opts);
  const int port = server.bind();
  std::thread worker([&] { server.listen(); });
  server.wait_until_ready();
  spdlog::info("serving on {}:{}", opts.host, port);
  int sig = 0;
  sigwait(&set, &sig);
  spdlog::info("signal {}, stopping", sig);
  server.stop();
  worker.join();
  return 0;
}

int analyze(const Globals& g, const SurveyArgs& a) {
  Database db(g.db_path);
  SurveyStore store(db);
  std::optional<std::string> survey;
  if (!a.survey.empty() && a.survey != "all") survey = a.survey;
  const auto models = model_ids(a, {});
  const auto questions = store.all_questions();
  bool seen = false;
  for (const auto& [id, q] : questions)
    if ((!survey || q.survey_id == *survey) &&
        (q.model_a == models.finetuned || q.model_b == models.finetuned))
      seen = true;
  if (!seen) throw InvalidInput("model " + models.finetuned + " does not appear in the survey; pass --finetuned-model");
  const auto result = analyze_preferences(store.votes(survey), questions, parse_clusters(a.clusters),
                                          a.reps, a.seed, models);
  fmt::print("{}", a.json ? analysis_json(result) + "\n" : render_analysis(result));
  return 0;
}

int export_votes(const Globals& g, const SurveyArgs& a) {
  Database db(g.db_path);
  SurveyStore store(db);
  std::optional<std::string> survey;
  if (!a.survey.empty() && a.survey != "all") survey = a.survey;
  std::size_t n = 0;
  if (a.out.empty() || a.out == "-") {
    n = store.export_votes(std::cout, survey, a.unblind);
  } else {
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + a.out, 0);
    n = store.export_votes(out, survey, a.unblind);
  }
  spdlog::info("exported {} votes", n);
  return 0;
}

void add_model_options(CLI::App* cmd, SurveyArgs& a) {
  cmd->add_option("--base-model", a.base_model, "Model id of the base system");
  cmd->add_option("--finetuned-model", a.finetuned_model, "Model id of the fine-tuned system");
}

}  // namespace

void add_survey(CLI::App& app, const Globals& globals, Handler& handler) {
  auto* s = app.add_subcommand("survey", "Blinded pairwise preference survey");
  s->require_subcommand(1);
  auto args = std::make_shared<SurveyArgs>();

  auto* gen = s->add_subcommand("generate", "Build a survey with randomised option positions");
  gen->add_option("--seed", args->seed, "Position seed")->required();
  gen->add_option("--survey", args->survey, "Survey id")->capture_default_str();
  gen->add_option("--input", args->input, "JSONL of {source, base, finetuned}")->check(CLI::ExistingFile);
  gen->add_option("--split-name", args->split_name, "Split whose test messages are used")->capture_default_str();
  gen->add_option("--base-backend", args->base_backend, "Backend of the base translations");
  gen->add_option("--finetuned-backend", args->finetuned_backend, "Backend of the fine-tuned translations");
  add_model_options(gen, *args);
  gen->callback([&globals, &handler, args] { handler = [&globals, args] { return generate(globals, *args); }; });

  auto* srv = s->add_subcommand("serve", "Serve the survey API and static UI");
  srv->add_option("--addr", args->addr, "host:port")->capture_default_str();
  srv->add_option("--static", args->static_dir, "Directory of the built UI")->check(CLI::ExistingDirectory);
  srv->add_flag("--allow-remote-admin", args->remote_admin, "Serve /api/admin to non-loopback clients");
  srv->add_option("--clusters", args->clusters, "respondent, question or both")->capture_default_str();
  srv->add_option("--reps", args->reps, "Bootstrap replicates")->capture_default_str();
  srv->add_option("--seed", args->seed, "Bootstrap seed")->capture_default_str();
  add_model_options(srv, *args);
  srv->callback([&globals, &handler, args] { handler = [&globals, args] { return serve(globals, *args); }; });

  auto* an = s->add_subcommand("analyze", "Preference proportion, binomial test and cluster bootstrap");
  an->add_option("--survey", args->survey, "Survey id, or all")->capture_default_str();
  an->add_option("--clusters", args->clusters, "respondent, question or both")->capture_default_str();
  an->add_option("--reps", args->reps, "Bootstrap replicates")->capture_default_str();
  an->add_option("--seed", args->seed, "Bootstrap seed")->capture_default_str();
  an->add_flag("--json", args->json, "JSON output");
  add_model_options(an, *args);
  an->callback([&globals, &handler, args] { handler = [&globals, args] { return analyze(globals, *args); }; });

  auto* ex = s->add_subcommand("export-votes", "One vote per line as JSONL");
  ex->add_option("--survey", args->survey, "Survey id, or all")->capture_default_str();
  ex->add_option("--out", args->out, "Output file (default: stdout)");
  ex->add_flag("--unblind", args->unblind, "Include the chosen model id");
  ex->callback([&globals, &handler, args] { handler = [&globals, args] { return export_votes(globals, *args); }; });
}

namespace {

struct CostArgs {
  double per_message = 0.21;
  double per_word = 0.0;
  double words_per_message = 0.0;
  double input_price = 0.0005;
  double output_price = 0.0015;
  std::int64_t input_tokens = -1;
  std::int64_t output_tokens = -1;
  std::int64_t messages = 0;
  std::string backend;
};

int cost(const Globals& g, const CostArgs& a) {
  TokenUsage usage{a.input_tokens, a.output_tokens};
  std::int64_t n = a.messages;
  if (!a.backend.empty()) {
    Database db(g.db_path);
    usage = {};
    n = 0;
    for (const auto& r : orchestrator::Orchestrator(db).records(std::nullopt, a.backend)) {
      if (r.status != orchestrator::TranslationStatus::kOk || !r.usage) continue;
      usage.input_tokens += r.usage->input_tokens;
      usage.output_tokens += r.usage->output_tokens;
      ++n;
    }
    if (n == 0) throw NotFound("no ok translations with usage for " + a.backend);
  } else if (a.input_tokens < 0 || a.output_tokens < 0 || a.messages < 1) {
    throw InvalidInput("pass --backend or --input-tokens, --output-tokens and --messages");
  }
  const auto c = cost_report({a.per_message, a.per_word, a.words_per_message},
                             {a.input_price, a.output_price}, usage, n);
  fmt::print("messages: {}  tokens in/out: {}/{}\n{}", n, usage.input_tokens, usage.output_tokens,
             render_cost(c));
  return 0;
}

}  // namespace

void add_report(CLI::App& app, const Globals& globals, Handler& handler) {
  auto* r = app.add_subcommand("report", "Reports");
  r->require_subcommand(1);
  auto args = std::make_shared<CostArgs>();
  auto* c = r->add_subcommand("cost", "Human versus model translation cost per message");
  c->add_option("--human-per-message", args->per_message, "Human price per message")->capture_default_str();
  c->add_option("--human-per-word", args->per_word, "Human price per word")->required();
  c->add_option("--words-per-message", args->words_per_message, "Average source words per message")->required();
  c->add_option("--input-price", args->input_price, "Model price per 1K input tokens")->capture_default_str();
  c->add_option("--output-price", args->output_price, "Model price per 1K output tokens")->capture_default_str();
  c->add_option("--backend", args->backend, "Sum usage of this backend's ok translations");
  c->add_option("--input-tokens", args->input_tokens, "Total input tokens");
  c->add_option("--output-tokens", args->output_tokens, "Total output tokens");
  c->add_option("--messages", args->messages, "Messages the tokens cover");
  c->callback([&globals, &handler, args] { handler = [&globals, args] { return cost(globals, *args); }; });
}

}  // namespace mtkit::cli
