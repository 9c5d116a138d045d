#include "mds/text.hpp"

#include <cctype>
#include <iostream>
#include <stdexcept>

#include "mds/error.hpp"
#include "mds/log.hpp"

namespace mds {

namespace {
bool warnings_enabled = true;
}

void warn(const std::string& msg) {
  if (warnings_enabled) std::cerr << "warning: " << msg << '\n';
}

void set_warnings_enabled(bool enabled) { warnings_enabled = enabled; }

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

std::string join(const std::vector<std::string>& tokens, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) {
    index_.emplace(t, tokens_.size());
    tokens_.emplace_back(t);
  }
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) {
    if (index_.count(t)) throw InputError("vocabulary entry '" + t + "' is duplicated or reserved");
    add(t);
  }
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) throw std::out_of_range("vocabulary index out of range");
  return tokens_[index];
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id != kPad && id != kBegin && id != kEnd) out.push_back(token(id));
  }
  return out;
}

std::vector<std::string> Vocabulary::entries() const {
  return {tokens_.begin() + kReserved, tokens_.end()};
}

}  // namespace mds
