#include "mtkit/orchestrator/backend.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mtkit/common/errors.hpp"
#include "mtkit/orchestrator/http.hpp"

namespace mtkit::orchestrator {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(fmt::format("field '{}' has the wrong type", key));
  }
}

BackendConfig backend_from(const json& j) {
  if (!j.is_object()) throw InvalidInput("backend entry must be an object");
  BackendConfig c;
  c.backend_id = get_or<std::string>(j, "backend_id", "");
  c.kind = parse_backend_kind(get_or<std::string>(j, "kind", ""));
  c.endpoint = get_or<std::string>(j, "endpoint", "");
  c.model_name = get_or<std::string>(j, "model_name", "");
  c.auth_env_var = get_or<std::string>(j, "auth_env_var", "");
  const auto params = j.value("params", json::object());
  c.temperature = get_or<double>(params, "temperature", 0.0);
  c.max_output_tokens = get_or<int>(params, "max_output_tokens", 1024);
  c.extra = get_or<std::map<std::string, std::string>>(params, "extra", {});
  c.rate_limit = get_or<double>(j, "rate_limit", 0.0);
  const auto retry = j.value("retry", json::object());
  c.retry.max_attempts = get_or<int>(retry, "max_attempts", 3);
  c.retry.backoff_base = std::chrono::milliseconds(get_or<std::int64_t>(retry, "backoff_base_ms", 500));
  c.retry.backoff_cap = std::chrono::milliseconds(get_or<std::int64_t>(retry, "backoff_cap_ms", 30'000));
  const auto http = j.value("http", json::object());
  HttpShape defaults;
  c.http.auth_header = get_or<std::string>(http, "auth_header", defaults.auth_header);
  c.http.auth_prefix = get_or<std::string>(http, "auth_prefix", defaults.auth_prefix);
  c.http.max_tokens_field = get_or<std::string>(http, "max_tokens_field", defaults.max_tokens_field);
  c.http.content_pointer = get_or<std::string>(http, "content_pointer", defaults.content_pointer);
  c.http.finish_reason_pointer =
      get_or<std::string>(http, "finish_reason_pointer", defaults.finish_reason_pointer);
  c.http.input_tokens_pointer =
      get_or<std::string>(http, "input_tokens_pointer", defaults.input_tokens_pointer);
  c.http.output_tokens_pointer =
      get_or<std::string>(http, "output_tokens_pointer", defaults.output_tokens_pointer);
  c.http.refusal_markers =
      get_or<std::vector<std::string>>(http, "refusal_markers", defaults.refusal_markers);
  c.http.headers = get_or<std::map<std::string, std::string>>(http, "headers", {});
  c.http.timeout = std::chrono::milliseconds(
      get_or<std::int64_t>(http, "timeout_ms", defaults.timeout.count()));
  if (j.contains("dictionary") && j["dictionary"].is_object())
    c.dictionary = j["dictionary"].get<std::map<std::string, std::string>>();
  return c;
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kChatCompletionHttp ? "chat_completion_http" : "mock_dictionary";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "chat_completion_http") return BackendKind::kChatCompletionHttp;
  if (name == "mock_dictionary") return BackendKind::kMockDictionary;
  throw InvalidInput(fmt::format("unknown backend kind '{}'", name));
}

void validate(const BackendConfig& c) {
  if (c.backend_id.empty()) throw InvalidInput("backend_id must not be empty");
  if (c.model_name.empty())
    throw InvalidInput(fmt::format("backend '{}' has no model_name", c.backend_id));
  if (c.rate_limit < 0.0)
    throw InvalidInput(fmt::format("backend '{}' has a negative rate limit", c.backend_id));
  if (c.retry.max_attempts < 1)
    throw InvalidInput(fmt::format("backend '{}' needs max_attempts >= 1", c.backend_id));
  if (c.retry.backoff_base.count() < 0 || c.retry.backoff_cap.count() < 0)
    throw InvalidInput(fmt::format("backend '{}' has a negative backoff", c.backend_id));
  if (c.kind == BackendKind::kChatCompletionHttp) {
    parse_endpoint(c.endpoint);
    for (const auto* pointer : {&c.http.content_pointer, &c.http.finish_reason_pointer,
                                &c.http.input_tokens_pointer, &c.http.output_tokens_pointer}) {
      try {
        if (!pointer->empty()) json::json_pointer p(*pointer);
      } catch (const json::exception&) {
        throw InvalidInput(fmt::format("backend '{}': bad JSON pointer '{}'", c.backend_id, *pointer));
      }
    }
  } else if (c.dictionary.empty()) {
    throw InvalidInput(fmt::format("mock backend '{}' has an empty dictionary", c.backend_id));
  }
}

std::string backend_to_json(const BackendConfig& c) {
  ordered_json j;
  j["backend_id"] = c.backend_id;
  j["kind"] = to_string(c.kind);
  if (!c.endpoint.empty()) j["endpoint"] = c.endpoint;
  j["model_name"] = c.model_name;
  if (!c.auth_env_var.empty()) j["auth_env_var"] = c.auth_env_var;
  j["params"] = {{"temperature", c.temperature},
                 {"max_output_tokens", c.max_output_tokens},
                 {"extra", c.extra}};
  j["rate_limit"] = c.rate_limit;
  j["retry"] = {{"max_attempts", c.retry.max_attempts},
                {"backoff_base_ms", c.retry.backoff_base.count()},
                {"backoff_cap_ms", c.retry.backoff_cap.count()}};
  if (c.kind == BackendKind::kChatCompletionHttp) {
    j["http"] = {{"auth_header", c.http.auth_header},
                 {"auth_prefix", c.http.auth_prefix},
                 {"max_tokens_field", c.http.max_tokens_field},
                 {"content_pointer", c.http.content_pointer},
                 {"finish_reason_pointer", c.http.finish_reason_pointer},
                 {"input_tokens_pointer", c.http.input_tokens_pointer},
                 {"output_tokens_pointer", c.http.output_tokens_pointer},
                 {"refusal_markers", c.http.refusal_markers},
                 {"headers", c.http.headers},
                 {"timeout_ms", c.http.timeout.count()}};
  } else {
    j["dictionary"] = c.dictionary;
  }
  return j.dump();
}

BackendConfig backend_from_json(std::string_view text) {
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("backend config is not valid JSON", 0);
  return backend_from(j);
}

std::map<std::string, std::string> load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dictionary " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t offset = 0;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto line_offset = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("{} line {}: {}", path.string(), number, e.what()),
                       line_offset + (e.byte > 0 ? e.byte - 1 : 0));
    }
    if (!entry.is_object() || !entry.contains("source") || !entry.contains("target") ||
        !entry["source"].is_string() || !entry["target"].is_string())
      throw ParseError(fmt::format("{} line {}: expected {{source, target}}", path.string(), number),
                       line_offset);
    out[entry["source"].get<std::string>()] = entry["target"].get<std::string>();
  }
  return out;
}

std::string mock_translate(const std::map<std::string, std::string>& dictionary,
                           std::string_view source) {
  if (const auto it = dictionary.find(std::string(source)); it != dictionary.end())
    return it->second;
  constexpr std::string_view kSpace = " \t\r\n";
  std::string out;
  std::size_t pos = 0;
  while (pos < source.size()) {
    const auto word_start = source.find_first_not_of(kSpace, pos);
    out.append(source.substr(pos, word_start - pos));
    if (word_start == std::string_view::npos) break;
    auto word_end = source.find_first_of(kSpace, word_start);
    if (word_end == std::string_view::npos) word_end = source.size();
    const std::string word(source.substr(word_start, word_end - word_start));
    const auto it = dictionary.find(word);
    out += it == dictionary.end() ? word : it->second;
    pos = word_end;
  }
  return out;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  json doc;
  try {
    doc = json::parse(data);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.byte > 0 ? e.byte - 1 : 0);
  }
  ToolkitConfig config;
  config.version = get_or<int>(doc, "version", 0);
  if (config.version != kConfigVersion)
    throw InvalidInput(fmt::format("{}: unsupported config version {} (expected {})",
                                   path.string(), config.version, kConfigVersion));
  const auto base = path.parent_path();
  for (const auto& entry : doc.value("backends", json::array())) {
    auto backend = backend_from(entry);
    if (backend.kind == BackendKind::kMockDictionary && entry.contains("dictionary") &&
        entry["dictionary"].is_string()) {
      std::filesystem::path dict = entry["dictionary"].get<std::string>();
      if (dict.is_relative()) dict = base / dict;
      backend.dictionary = load_dictionary(dict);
    }
    validate(backend);
    config.backends.push_back(std::move(backend));
  }
  for (const auto& entry : doc.value("prompts", json::array())) {
    PromptSlot slot;
    slot.prompt_id = get_or<std::string>(entry, "prompt_id", "");
    if (slot.prompt_id.empty()) throw InvalidInput("prompt entry without prompt_id");
    const auto builtin = get_or<std::string>(entry, "builtin", "");
    if (builtin == kDefaultPromptId) {
      slot.text = std::string(default_prompt_text());
    } else if (!builtin.empty()) {
      throw InvalidInput(fmt::format("unknown builtin prompt '{}'", builtin));
    } else if (entry.contains("text") && entry["text"].is_string()) {
      slot.text = entry["text"].get<std::string>();
    }
    config.prompts.push_back(std::move(slot));
  }
  return config;
}

}  // namespace mtkit::orchestrator
