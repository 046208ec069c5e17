#include "mtkit/evalharness/cost.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "mtkit/common/errors.hpp"

namespace mtkit::evalharness {

CostComparison cost_report(const HumanCost& human, const ModelPricing& pricing,
                           const TokenUsage& usage, std::int64_t n_messages) {
  if (!(human.per_message > 0.0) || !(human.per_word > 0.0))
    throw InvalidInput("human prices must be positive");
  if (!(human.words_per_message > 0.0))
    throw InvalidInput("words per message must be positive");
  if (!(pricing.per_1k_input_tokens > 0.0) || !(pricing.per_1k_output_tokens > 0.0))
    throw InvalidInput("model prices must be positive");
  if (usage.input_tokens < 0 || usage.output_tokens < 0)
    throw InvalidInput("token usage must not be negative");
  if (n_messages < 1) throw InvalidInput("need at least one message");

  CostComparison c;
  const double token_cost =
      static_cast<double>(usage.input_tokens) / 1000.0 * pricing.per_1k_input_tokens +
      static_cast<double>(usage.output_tokens) / 1000.0 * pricing.per_1k_output_tokens;
  c.model_cost_per_message = token_cost / static_cast<double>(n_messages);
  const double per_word_message = human.per_word * human.words_per_message;
  c.human_cost_per_message_low = std::min(human.per_message, per_word_message);
  c.human_cost_per_message_high = std::max(human.per_message, per_word_message);
  if (c.model_cost_per_message == 0.0) {
    c.ratio_infinite = true;
    c.ratio_low = c.ratio_high = std::numeric_limits<double>::infinity();
  } else {
    c.ratio_low = c.human_cost_per_message_low / c.model_cost_per_message;
    c.ratio_high = c.human_cost_per_message_high / c.model_cost_per_message;
  }
  return c;
}

std::string render_cost(const CostComparison& c) {
  const auto ratio = [&](double r) {
    return c.ratio_infinite ? std::string("infinite (model cost is zero)") : fmt::format("{:.1f}", r);
  };
  return fmt::format(
      "model cost per message: ${:.6f}\n"
      "human cost per message: ${:.4f} to ${:.4f}\n"
      "human / model: {} to {}\n",
      c.model_cost_per_message, c.human_cost_per_message_low, c.human_cost_per_message_high,
      ratio(c.ratio_low), ratio(c.ratio_high));
}

}  // namespace mtkit::evalharness
