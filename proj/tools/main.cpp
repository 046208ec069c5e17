#include <iostream>

#include <fmt/core.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "mtkit/common/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mtkit: corpus, translation, fine-tune, metrics and survey tooling"};
  app.require_subcommand(1);
  mtkit::cli::Globals globals;
  app.add_option("--db", globals.db_path, "SQLite database file")->capture_default_str();
  app.add_flag("-v,--verbose", globals.verbose, "Debug logging");

  mtkit::cli::Handler handler;
  mtkit::cli::add_corpus(app, globals, handler);
  mtkit::cli::add_translate(app, globals, handler);
  mtkit::cli::add_finetune(app, globals, handler);
  mtkit::cli::add_metrics(app, globals, handler);
  mtkit::cli::add_survey(app, globals, handler);
  mtkit::cli::add_report(app, globals, handler);

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("mtkit");
  logger->set_pattern("%Y-%m-%dT%H:%M:%S %^%l%$ %v");
  logger->set_level(globals.verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_default_logger(logger);

  if (!handler) return 2;
  try {
    return handler();
  } catch (const mtkit::AnalysisError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    for (const auto& o : e.offenders()) fmt::print(stderr, "  {}\n", o);
    return 1;
  } catch (const mtkit::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
