#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mds/acquisition.hpp"

namespace mds {

/// Multimodal context plus its ground-truth response tokens.
struct DialogPair {
  std::vector<std::string> utterances;
  DialogContext context;
  std::vector<std::string> response;
};

inline constexpr std::size_t kDefaultContextWindow = 2;

/// Builds a context from raw utterances, keeping only the last `window`
/// utterances (0 keeps all).
DialogContext make_context(const std::vector<std::string>& utterances, std::vector<FeatureVector> images,
                           std::size_t window = kDefaultContextWindow);

/// One JSON object {"context_utterances", "context_image_features",
/// "response"}; "response" may be absent only when `require_response` is false.
DialogPair parse_pair(const std::string& json_text, std::size_t window = kDefaultContextWindow,
                      bool require_response = true);

/// JSON lines; blank lines skipped. Errors carry the 1-based line number.
std::vector<DialogPair> parse_corpus(std::istream& in, std::size_t window = kDefaultContextWindow);
std::vector<DialogPair> load_corpus(const std::string& path, std::size_t window = kDefaultContextWindow);
void write_corpus(std::ostream& out, const std::vector<DialogPair>& pairs);

}  // namespace mds
