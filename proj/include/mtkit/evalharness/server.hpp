#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mtkit/common/store.hpp"
#include "mtkit/evalharness/analysis.hpp"
#include "mtkit/evalharness/survey.hpp"

namespace mtkit::evalharness {

struct ServerOptions {
  std::string host = "127.0.0.1";
  // 0 picks a free port.
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  // The analysis endpoint answers loopback clients only unless cleared.
  bool admin_loopback_only = true;
  ModelIds models;
  Clusters clusters = Clusters::kBoth;
  std::size_t bootstrap_reps = 10'000;
  std::uint64_t seed = 0;
};

// JSON API for the survey front end:
//   POST /api/respondent            {english_level, cyber_level, consent}
//   GET  /api/survey/{id}/questions blinded questions
//   POST /api/vote                  {respondent_id, question_id, chosen_position}
//   GET  /api/admin/analysis        unblinded analysis (?survey=&clusters=&reps=&seed=)
class SurveyServer {
 public:
  SurveyServer(Database& db, ServerOptions options);
  ~SurveyServer();
  SurveyServer(const SurveyServer&) = delete;
  SurveyServer& operator=(const SurveyServer&) = delete;

  // Binds the socket and returns the port. Throws IoError.
  int bind();
  // Serves until stop(); call bind() first.
  void listen();
  void stop();
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mtkit::evalharness
