#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace mds {

/// Lowercases and splits on whitespace; every ASCII punctuation character
/// becomes its own token.
std::vector<std::string> tokenize(const std::string& text);

std::string join(const std::vector<std::string>& tokens, const std::string& sep = " ");

/// Token to index map with four reserved entries at the front.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBegin = 1;
  static constexpr std::size_t kEnd = 2;
  static constexpr std::size_t kUnknown = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  /// Reserved tokens are implied and must not appear in `tokens`.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  /// Returns the index of `token`, adding it if new.
  std::size_t add(const std::string& token);
  std::size_t index(const std::string& token) const;
  const std::string& token(std::size_t index) const;
  std::size_t size() const { return tokens_.size(); }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  /// Drops pad, begin and end markers.
  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const;

  /// Non-reserved tokens in index order.
  std::vector<std::string> entries() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mds
