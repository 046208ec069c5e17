#include "mtkit/evalharness/server.hpp"

#include <httplib.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mtkit/common/errors.hpp"

namespace mtkit::evalharness {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void error(httplib::Response& res, int status, std::string_view message) {
  reply(res, status, json{{"error", message}});
}

bool is_loopback(const std::string& addr) {
  return addr == "127.0.0.1" || addr == "::1" || addr.starts_with("127.") ||
         addr.starts_with("::ffff:127.");
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    error(res, 400, "request body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string())
    throw InvalidInput(fmt::format("field '{}' must be a string", key));
  return body[key].get<std::string>();
}

}  // namespace

struct SurveyServer::Impl {
  Impl(Database& db, ServerOptions opts) : store(db), options(std::move(opts)) {}

  SurveyStore store;
  ServerOptions options;
  httplib::Server server;
  std::mutex analysis_mutex;

  // Maps toolkit errors to HTTP statuses.
  template <typename F>
  void guarded(httplib::Response& res, F&& handler) {
    try {
      handler();
    } catch (const InvalidInput& e) {
      error(res, 400, e.what());
    } catch (const ConsentError& e) {
      error(res, 403, e.what());
    } catch (const NotFound& e) {
      error(res, 404, e.what());
    } catch (const ConflictError& e) {
      error(res, 409, e.what());
    } catch (const AnalysisError& e) {
      reply(res, 422, json{{"error", e.what()}, {"offenders", e.offenders()}});
    } catch (const std::exception& e) {
      spdlog::error("survey server: {}", e.what());
      error(res, 500, "internal error");
    }
  }

  void routes() {
    server.Post("/api/respondent", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req, res);
        if (!body) return;
        if (!body->contains("consent") || !(*body)["consent"].is_boolean())
          throw InvalidInput("field 'consent' must be a boolean");
        const auto english = parse_english_level(string_field(*body, "english_level"));
        const auto cyber = parse_cyber_level(string_field(*body, "cyber_level"));
        if (!(*body)["consent"].get<bool>()) {
          error(res, 403, "consent is required to take part");
          return;
        }
        const auto p = store.create_respondent(english, cyber, true);
        reply(res, 201, json{{"respondent_id", p.respondent_id}});
      });
    });

    server.Get(R"(/api/survey/([^/]+)/questions)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   const auto questions = store.questions(req.matches[1].str());
                   if (questions.empty()) throw NotFound("unknown survey");
                   // Only the blinded fields; the hidden map stays here.
                   json out = json::array();
                   for (const auto& q : questions)
                     out.push_back({{"question_id", q.question_id},
                                    {"order_index", q.order_index},
                                    {"source_text", q.source_text},
                                    {"option_a_text", q.option_a_text},
                                    {"option_b_text", q.option_b_text}});
                   reply(res, 200, out);
                 });
               });

    server.Post("/api/vote", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = parse_body(req, res);
        if (!body) return;
        const auto vote = store.record_vote(
            string_field(*body, "respondent_id"), string_field(*body, "question_id"),
            parse_position(string_field(*body, "chosen_position")));
        reply(res, 201, json{{"vote_id", vote.vote_id}, {"captured_at", vote.captured_at}});
      });
    });

    server.Get("/api/admin/analysis", [this](const httplib::Request& req, httplib::Response& res) {
      if (options.admin_loopback_only && !is_loopback(req.remote_addr)) {
        error(res, 403, "analysis is available from the local host only");
        return;
      }
      guarded(res, [&] {
        std::optional<std::string> survey;
        if (req.has_param("survey")) survey = req.get_param_value("survey");
        auto clusters = options.clusters;
        if (req.has_param("clusters")) clusters = parse_clusters(req.get_param_value("clusters"));
        auto reps = options.bootstrap_reps;
        auto seed = options.seed;
        try {
          if (req.has_param("reps")) reps = std::stoul(req.get_param_value("reps"));
          if (req.has_param("seed")) seed = std::stoull(req.get_param_value("seed"));
        } catch (const std::exception&) {
          throw InvalidInput("reps and seed must be non-negative integers");
        }
        std::lock_guard lock(analysis_mutex);
        const auto votes = store.votes(survey);
        const auto analysis = analyze_preferences(votes, store.all_questions(), clusters, reps,
                                                  seed, options.models);
        reply(res, 200, json::parse(analysis_json(analysis)));
      });
    });

    if (options.static_dir && !server.set_mount_point("/", options.static_dir->string()))
      throw IoError("static directory " + options.static_dir->string() + " does not exist");
  }
};

SurveyServer::SurveyServer(Database& db, ServerOptions options)
    : impl_(std::make_unique<Impl>(db, std::move(options))) {
  impl_->routes();
}

SurveyServer::~SurveyServer() { stop(); }

int SurveyServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    o.port = impl_->server.bind_to_any_port(o.host);
    if (o.port < 0) throw IoError(fmt::format("cannot bind {}", o.host));
  } else if (!impl_->server.bind_to_port(o.host, o.port)) {
    throw IoError(fmt::format("cannot bind {}:{}", o.host, o.port));
  }
  return o.port;
}

void SurveyServer::listen() { impl_->server.listen_after_bind(); }

void SurveyServer::stop() {
  if (impl_) impl_->server.stop();
}

void SurveyServer::wait_until_ready() { impl_->server.wait_until_ready(); }

}  // namespace mtkit::evalharness
