#pragma once

#include <cstdint>
#include <string>

namespace mtkit::evalharness {

struct HumanCost {
  double per_message = 0.0;
  double per_word = 0.0;
  // Average source length used to turn per-word pricing into a per-message
  // figure.
  double words_per_message = 0.0;
};

struct ModelPricing {
  double per_1k_input_tokens = 0.0;
  double per_1k_output_tokens = 0.0;
};

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct CostComparison {
  double model_cost_per_message = 0.0;
  double human_cost_per_message_low = 0.0;
  double human_cost_per_message_high = 0.0;
  // human / model at each bound; +inf when the model cost is zero.
  double ratio_low = 0.0;
  double ratio_high = 0.0;
  bool ratio_infinite = false;
};

// Human bounds are the smaller and larger of the per-message price and
// per_word * words_per_message. Throws InvalidInput for non-positive prices,
// negative usage or n_messages < 1.
CostComparison cost_report(const HumanCost& human, const ModelPricing& pricing,
                           const TokenUsage& usage, std::int64_t n_messages);

std::string render_cost(const CostComparison& cost);

}  // namespace mtkit::evalharness
