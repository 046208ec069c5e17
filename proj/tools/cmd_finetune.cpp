#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include <fmt/core.h>

#include "commands.hpp"
#include "mtkit/common/digest.hpp"
#include "mtkit/common/errors.hpp"
#include "mtkit/common/prompt.hpp"
#include "mtkit/common/store.hpp"
#include "mtkit/corpus/corpus.hpp"
#include "mtkit/finetune/finetune.hpp"
#include "mtkit/orchestrator/orchestrator.hpp"

namespace mtkit::cli {
namespace {

namespace fs = std::filesystem;

struct FinetuneArgs {
  std::string prompt{kDefaultPromptId};
  std::string out = "finetune.jsonl";
  std::string validation_out;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::string translator;
  std::string split_name;
  std::string picks_rater;
  std::string file;
  std::string file_digest;
  std::string base_model = "gpt-3.5-turbo-0125";
  std::string vendor_job_id;
  std::string result_model;
  std::vector<std::string> params;
};

PromptTemplate resolve_prompt(Database& db, const std::string& id) {
  try {
    return orchestrator::Orchestrator(db).prompt(id);
  } catch (const NotFound&) {
    if (id == kDefaultPromptId) return default_prompt();
    throw;
  }
}

std::size_t write_file(const fs::path& path, std::span<const finetune::FineTuneRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string(), 0);
  const auto bytes = finetune::serialize_jsonl(records, out);
  out.close();
  if (!out) throw IoError("cannot write " + path.string(), bytes);
  return bytes;
}

int build(const Globals& globals, const FinetuneArgs& a) {
  Database db(globals.db_path);
  corpus::Corpus store(db);
  std::optional<std::string> translator;
  if (!a.translator.empty()) translator = a.translator;
  auto truth = store.ground_truth(translator);

  // Held-out test messages never reach the fine-tuning file.
  if (!a.split_name.empty()) {
    const auto split = store.load_split(a.split_name);
    const auto keys = split.keys(corpus::Assignment::kTrainVal);
    const std::set<corpus::MessageKey> allowed(keys.begin(), keys.end());
    std::erase_if(truth, [&](const corpus::GroundTruthEntry& e) {
      return e.kind == corpus::GroundTruthKind::kMessage && !allowed.contains(*e.message);
    });
  }

  std::map<corpus::MessageKey, std::int64_t> picks;
  if (!a.picks_rater.empty())
    for (const auto& p : orchestrator::Orchestrator(db).best_picks(a.picks_rater))
      picks[p.message] = p.record_id;

  const auto records = finetune::build_finetune_dataset(truth, resolve_prompt(db, a.prompt),
                                                        picks.empty() ? nullptr : &picks);
  const auto split = finetune::split_finetune(records, a.train_fraction, a.seed);

  const fs::path train_path = a.out;
  fs::path val_path = a.validation_out;
  if (val_path.empty())
    val_path = train_path.parent_path() /
               (train_path.stem().string() + ".validation" + train_path.extension().string());
  write_file(train_path, split.train);
  write_file(val_path, split.validation);
  fmt::print("train {} -> {} sha256 {}\n", split.train.size(), train_path.string(),
             sha256_file_hex(train_path));
  fmt::print("validation {} -> {} sha256 {}\n", split.validation.size(), val_path.string(),
             sha256_file_hex(val_path));
  return 0;
}

}  // namespace

void add_finetune(CLI::App& app, const Globals& globals, Handler& handler) {
  auto* ft = app.add_subcommand("finetune", "Fine-tuning dataset and job metadata");
  ft->require_subcommand(1);
  auto args = std::make_shared<FinetuneArgs>();

  auto* b = ft->add_subcommand("build", "Write train and validation JSONL from the ground truth");
  b->add_option("--prompt", args->prompt, "Prompt id")->capture_default_str();
  b->add_option("--out", args->out, "Training file")->capture_default_str();
  b->add_option("--validation-out", args->validation_out,
                "Validation file (default: <out stem>.validation.jsonl)");
  b->add_option("--seed", args->seed, "Shuffle seed")->capture_default_str();
  b->add_option("--train-fraction", args->train_fraction, "Train share")->capture_default_str();
  b->add_option("--translator", args->translator, "Only this translator's entries");
  b->add_option("--split-name", args->split_name, "Drop message entries outside this split's train_val");
  b->add_option("--picks-rater", args->picks_rater, "Attach this rater's best picks as provenance");
  b->callback([&globals, &handler, args] { handler = [&globals, args] { return build(globals, *args); }; });

  auto* v = ft->add_subcommand("validate", "Check a fine-tuning JSONL file");
  v->add_option("file", args->file, "JSONL file")->required()->check(CLI::ExistingFile);
  v->callback([&handler, args] {
    handler = [args] {
      std::ifstream in(args->file, std::ios::binary);
      if (!in) throw IoError("cannot open " + args->file, 0);
      const auto report = finetune::validate_jsonl(in);
      fmt::print("{}", render_report(report));
      return report.clean() ? 0 : 3;
    };
  });

  auto* job = ft->add_subcommand("record-job", "Store metadata of a vendor fine-tuning job");
  auto* digest_opt = job->add_option("--file-digest", args->file_digest, "sha256 of the uploaded file");
  job->add_option("--file", args->file, "Compute the digest from this file")->excludes(digest_opt);
  job->add_option("--result-model", args->result_model, "Resulting model name");
  job->add_option("--base-model", args->base_model, "Base model")->capture_default_str();
  job->add_option("--vendor-job-id", args->vendor_job_id, "Vendor job id");
  job->add_option("--param", args->params, "Hyperparameter key=value (repeatable)");
  job->callback([&globals, &handler, args] {
    handler = [&globals, args] {
      finetune::FineTuneJob j;
      j.base_model = args->base_model;
      j.file_digest = args->file.empty() ? args->file_digest : sha256_file_hex(args->file);
      if (j.file_digest.empty()) throw InvalidInput("pass --file-digest or --file");
      if (!args->vendor_job_id.empty()) j.vendor_job_id = args->vendor_job_id;
      if (!args->result_model.empty()) j.result_model = args->result_model;
      for (const auto& p : args->params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos || eq == 0) throw InvalidInput("--param wants key=value: " + p);
        j.params[p.substr(0, eq)] = p.substr(eq + 1);
      }
      Database db(globals.db_path);
      fmt::print("job {}\n", finetune::record_job(db, j));
      return 0;
    };
  });

  auto* jobs = ft->add_subcommand("jobs", "List recorded jobs");
  jobs->callback([&globals, &handler] {
    handler = [&globals] {
      Database db(globals.db_path);
      for (const auto& j : finetune::list_jobs(db))
        fmt::print("{} {} {} {} {}\n", j.job_row, j.created_at, j.base_model, j.file_digest,
                   j.result_model.value_or("-"));
      return 0;
    };
  });
}

}  // namespace mtkit::cli
