#include <fstream>
#include <memory>
#include <optional>

#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "mtkit/common/errors.hpp"
#include "mtkit/common/store.hpp"
#include "mtkit/corpus/corpus.hpp"

namespace mtkit::cli {
namespace {

using corpus::Corpus;
using corpus::GroundTruthEntry;
using corpus::GroundTruthKind;
using corpus::MessageKey;

struct CorpusArgs {
  std::string channel;
  std::string file;
  std::size_t n = 0;
  std::size_t test_n = 0;
  std::string split_name = "default";
  std::string translator = "expert";
  std::string message;
  std::string source;
  std::string target;
};

// Bulk ground truth: {"message_id": 12, "target": ...} needs --channel,
// {"source": ..., "target": ...} is a vocabulary entry.
std::size_t add_truth_file(Corpus& store, const CorpusArgs& a) {
  std::ifstream in(a.file);
  if (!in) throw IoError("cannot open " + a.file, 0);
  std::string line;
  std::size_t added = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(fmt::format("{}:{}: {}", a.file, line_no, e.what()));
    }
    GroundTruthEntry entry;
    entry.translator_id = j.value("translator_id", a.translator);
    entry.target_text = j.value("target", "");
    if (j.contains("message_id")) {
      if (a.channel.empty()) throw InvalidInput("message entries need --channel");
      const MessageKey key{a.channel, j["message_id"].get<std::int64_t>()};
      const auto msg = store.find(key);
      if (!msg) throw NotFound(fmt::format("{}:{}: message {}", a.file, line_no, key.to_string()));
      entry.kind = GroundTruthKind::kMessage;
      entry.message = key;
      entry.source_text = msg->text;
    } else {
      entry.kind = GroundTruthKind::kVocabulary;
      entry.source_text = j.value("source", "");
    }
    store.add_ground_truth(entry);
    ++added;
  }
  return added;
}

}  // namespace

void add_corpus(CLI::App& app, const Globals& globals, Handler& handler) {
  auto* corpus = app.add_subcommand("corpus", "Message store, selection and splits");
  corpus->require_subcommand(1);
  auto args = std::make_shared<CorpusArgs>();

  auto* import = corpus->add_subcommand("import", "Import a Telegram export or JSONL file");
  import->add_option("--channel", args->channel, "Channel id")->required();
  import->add_option("--file", args->file, "Export file")->required()->check(CLI::ExistingFile);
  import->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      Database db(globals.db_path);
      const auto report = Corpus(db).import_file(args->file, args->channel);
      fmt::print("imported {} skipped {} errors {}\n", report.imported, report.skipped,
                 report.errors.size());
      for (const auto& e : report.errors) fmt::print("  {}\n", e);
      return 0;
    };
  });

  auto* select = corpus->add_subcommand("select", "Print the first n messages of a channel");
  select->add_option("--channel", args->channel, "Channel id (default: the only channel)");
  select->add_option("--n", args->n, "Message count")->required();
  select->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      Database db(globals.db_path);
      Corpus store(db);
      auto channel = args->channel;
      if (channel.empty()) {
        const auto channels = store.channels();
        if (channels.size() != 1) throw InvalidInput("several channels stored; pass --channel");
        channel = channels.front();
      }
      for (const auto& m : store.select_chronological(channel, args->n)) {
        nlohmann::ordered_json j{{"key", m.key().to_string()},
                                 {"date", m.timestamp},
                                 {"text", m.text}};
        fmt::print("{}\n", j.dump());
      }
      return 0;
    };
  });

  auto* split = corpus->add_subcommand("split", "Select n messages and label the last test-n as test");
  split->add_option("--channel", args->channel, "Channel id (default: the only channel)");
  split->add_option("--n", args->n, "Messages to select (default: all stored)");
  split->add_option("--test-n", args->test_n, "Test messages")->required();
  split->add_option("--name", args->split_name, "Split name")->capture_default_str();
  split->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      Database db(globals.db_path);
      Corpus store(db);
      auto channel = args->channel;
      if (channel.empty()) {
        const auto channels = store.channels();
        if (channels.size() != 1) throw InvalidInput("several channels stored; pass --channel");
        channel = channels.front();
      }
      const auto n = args->n ? args->n : store.count(channel);
      const auto selected = store.select_chronological(channel, n);
      const auto result = corpus::split_corpus(selected, args->test_n, args->split_name);
      store.save_split(result);
      fmt::print("split {}: train_val {} test {}\n", result.name,
                 result.keys(corpus::Assignment::kTrainVal).size(),
                 result.keys(corpus::Assignment::kTest).size());
      return 0;
    };
  });

  auto* truth = corpus->add_subcommand("truth", "Expert ground truth");
  truth->require_subcommand(1);
  auto* add = truth->add_subcommand("add", "Add a message or vocabulary translation");
  auto* message_opt = add->add_option("--message", args->message, "Message key channel:id");
  auto* source_opt = add->add_option("--source", args->source, "Vocabulary source term");
  auto* file_opt = add->add_option("--file", args->file, "JSONL of entries")->check(CLI::ExistingFile);
  add->add_option("--channel", args->channel, "Channel for message_id lines in --file");
  add->add_option("--target", args->target, "English translation");
  add->add_option("--translator", args->translator, "Translator id")->capture_default_str();
  message_opt->excludes(source_opt)->excludes(file_opt);
  source_opt->excludes(file_opt);
  add->callback([&globals, &handler, args, message_opt, source_opt, file_opt] {
    const bool single = message_opt->count() || source_opt->count();
    handler = [&globals, args, single, message_opt] {
      Database db(globals.db_path);
      Corpus store(db);
      if (!single) {
        if (args->file.empty()) throw InvalidInput("pass --message, --source or --file");
        fmt::print("added {}\n", add_truth_file(store, *args));
        return 0;
      }
      GroundTruthEntry entry;
      entry.translator_id = args->translator;
      entry.target_text = args->target;
      if (message_opt->count()) {
        const auto key = MessageKey::parse(args->message);
        const auto msg = store.find(key);
        if (!msg) throw NotFound("message " + key.to_string());
        entry.kind = GroundTruthKind::kMessage;
        entry.message = key;
        entry.source_text = msg->text;
      } else {
        entry.kind = GroundTruthKind::kVocabulary;
        entry.source_text = args->source;
      }
      fmt::print("{}\n", store.add_ground_truth(entry));
      return 0;
    };
  });
}

}  // namespace mtkit::cli
