#pragma once

#include <string>
#include <string_view>

namespace mtkit {

// A named system prompt. content_hash is the SHA-256 of text, so any edit
// yields a new (prompt_id, content_hash) pair rather than a silent change.
struct PromptTemplate {
  std::string prompt_id;
  std::string text;
  std::string content_hash;
};

PromptTemplate make_prompt(std::string prompt_id, std::string text);

// Id of the shipped translator-bot prompt.
inline constexpr std::string_view kDefaultPromptId = "appendix-1";

std::string_view default_prompt_text();
PromptTemplate default_prompt();

}  // namespace mtkit
