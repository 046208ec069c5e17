#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/common/prompt.hpp"

namespace mtkit::orchestrator {

enum class BackendKind { kChatCompletionHttp, kMockDictionary };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{30'000};
};

// Wire shape of a chat-completion endpoint. The defaults fit the common
// OpenAI-style API; other vendors are reached by changing these fields.
struct HttpShape {
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::string max_tokens_field = "max_tokens";
  std::string content_pointer = "/choices/0/message/content";
  std::string finish_reason_pointer = "/choices/0/finish_reason";
  std::string input_tokens_pointer = "/usage/prompt_tokens";
  std::string output_tokens_pointer = "/usage/completion_tokens";
  // Error codes, error types or finish reasons that mean the vendor refused
  // the content. Matched exactly.
  std::vector<std::string> refusal_markers{"content_policy_violation", "content_filter"};
  std::map<std::string, std::string> headers;
  std::chrono::milliseconds timeout{60'000};
};

struct BackendConfig {
  std::string backend_id;
  BackendKind kind = BackendKind::kMockDictionary;
  std::string endpoint;
  std::string model_name;
  // Name of the environment variable that holds the API key. The key
  // itself is read at call time and never stored.
  std::string auth_env_var;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  // Extra request-body fields. Values that parse as JSON are sent as such,
  // anything else as a string.
  std::map<std::string, std::string> extra;
  // Requests per minute; 0 disables limiting.
  double rate_limit = 0.0;
  RetryPolicy retry;
  HttpShape http;
  // Mock backends: source -> target.
  std::map<std::string, std::string> dictionary;
};

// Throws InvalidInput when the config breaks its invariants.
void validate(const BackendConfig& config);

// The JSON form stored in the database and used in config files.
std::string backend_to_json(const BackendConfig& config);
BackendConfig backend_from_json(std::string_view json);

// JSONL with one {"source": ..., "target": ...} object per line.
std::map<std::string, std::string> load_dictionary(const std::filesystem::path& path);

// Whole-text lookup first, then word-by-word substitution keeping the
// original whitespace; unknown words pass through unchanged.
std::string mock_translate(const std::map<std::string, std::string>& dictionary,
                           std::string_view source);

struct PromptSlot {
  std::string prompt_id;
  // Empty for an unfilled slot.
  std::optional<std::string> text;
};

struct ToolkitConfig {
  int version = 1;
  std::vector<BackendConfig> backends;
  std::vector<PromptSlot> prompts;
};

inline constexpr int kConfigVersion = 1;

// Relative dictionary paths resolve against the config file's directory.
// Throws ParseError for malformed JSON and InvalidInput for an unsupported
// version or invalid entries.
ToolkitConfig load_config(const std::filesystem::path& path);

}  // namespace mtkit::orchestrator
