#pragma once

#include <string>
#include <string_view>

namespace mtkit::metrics {

// Porter (1980) suffix-stripping stemmer for lower-case ASCII English
// words. Anything else (capitals, digits, Cyrillic) is returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace mtkit::metrics
