#include <memory>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "mtkit/common/errors.hpp"
#include "mtkit/common/store.hpp"
#include "mtkit/corpus/corpus.hpp"
#include "mtkit/orchestrator/orchestrator.hpp"

namespace mtkit::cli {
namespace {

struct TranslateArgs {
  std::string config;
  std::vector<std::string> backends;
  std::string prompt = "appendix-1";
  std::string split = "train_val";
  std::string split_name = "default";
  std::size_t max_in_flight = 4;
  std::string message;
  std::int64_t record = 0;
  std::string rater = "expert";
};

corpus::Assignment parse_assignment(const std::string& name) {
  if (name == "train_val") return corpus::Assignment::kTrainVal;
  if (name == "test") return corpus::Assignment::kTest;
  throw InvalidInput("split must be train_val or test, got " + name);
}

}  // namespace

void add_translate(CLI::App& app, const Globals& globals, Handler& handler) {
  auto* translate = app.add_subcommand("translate", "Backends, translation runs and best picks");
  translate->require_subcommand(1);
  auto args = std::make_shared<TranslateArgs>();

  auto* reg = translate->add_subcommand("register", "Register backends and prompts from a config file");
  reg->add_option("--config", args->config, "Config JSON")->required()->check(CLI::ExistingFile);
  reg->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      Database db(globals.db_path);
      orchestrator::Orchestrator orch(db);
      const auto added = orch.apply_config(orchestrator::load_config(args->config));
      for (const auto& id : added) fmt::print("registered {}\n", id);
      fmt::print("{} new backends\n", added.size());
      return 0;
    };
  });

  auto* run = translate->add_subcommand("run", "Translate one side of a split with each backend");
  run->add_option("--backend", args->backends, "Backend id (repeatable)")->required();
  run->add_option("--prompt", args->prompt, "Prompt id")->capture_default_str();
  run->add_option("--split", args->split, "train_val or test")->capture_default_str();
  run->add_option("--split-name", args->split_name, "Stored split")->capture_default_str();
  run->add_option("--max-in-flight", args->max_in_flight, "Concurrent requests")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  run->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      Database db(globals.db_path);
      const auto split = corpus::Corpus(db).load_split(args->split_name);
      const auto keys = split.keys(parse_assignment(args->split));
      orchestrator::Orchestrator orch(db);
      spdlog::info("translating {} messages with {} backends", keys.size(), args->backends.size());
      const auto report = orch.translate_batch(keys, args->backends, args->prompt, args->max_in_flight);
      fmt::print("{:<28} {:>6} {:>8} {:>7}\n", "backend", "ok", "refused", "failed");
      for (const auto& [backend, c] : report.per_backend)
        fmt::print("{:<28} {:>6} {:>8} {:>7}\n", backend, c.ok, c.refused, c.failed);
      return 0;
    };
  });

  auto* pick = translate->add_subcommand("pick", "Record the rater's best translation of a message");
  pick->add_option("--message", args->message, "Message key channel:id")->required();
  pick->add_option("--record", args->record, "Translation record id")->required();
  pick->add_option("--rater", args->rater, "Rater id")->capture_default_str();
  pick->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      Database db(globals.db_path);
      orchestrator::Orchestrator orch(db);
      const auto p = orch.record_best_pick(corpus::MessageKey::parse(args->message), args->record,
                                           args->rater);
      fmt::print("{} -> record {} ({})\n", p.message.to_string(), p.record_id, p.rater_id);
      return 0;
    };
  });
}

}  // namespace mtkit::cli
