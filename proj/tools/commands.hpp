#pragma once

#include <functional>
#include <string>

#include <CLI11.hpp>

namespace mtkit::cli {

// Set after parsing; the database is opened lazily by each handler.
struct Globals {
  std::string db_path = "mtkit.db";
  bool verbose = false;
};

// Each add_* registers a subcommand tree. Handlers run after parsing and
// return the process exit code.
using Handler = std::function<int()>;

void add_corpus(CLI::App& app, const Globals& globals, Handler& handler);
void add_translate(CLI::App& app, const Globals& globals, Handler& handler);
void add_finetune(CLI::App& app, const Globals& globals, Handler& handler);
void add_metrics(CLI::App& app, const Globals& globals, Handler& handler);
void add_survey(CLI::App& app, const Globals& globals, Handler& handler);
void add_report(CLI::App& app, const Globals& globals, Handler& handler);

}  // namespace mtkit::cli
