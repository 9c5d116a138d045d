#include "mds/corpus.hpp"

#include <fstream>

#include <json.hpp>

#include "mds/error.hpp"
#include "mds/text.hpp"

namespace mds {

using json = nlohmann::json;

DialogContext make_context(const std::vector<std::string>& utterances, std::vector<FeatureVector> images,
                           std::size_t window) {
  DialogContext ctx;
  const std::size_t first = (window == 0 || utterances.size() <= window) ? 0 : utterances.size() - window;
  for (std::size_t i = first; i < utterances.size(); ++i) {
    for (auto& t : tokenize(utterances[i])) ctx.text_tokens.push_back(std::move(t));
  }
  ctx.image_features = std::move(images);
  return ctx;
}

DialogPair parse_pair(const std::string& json_text, std::size_t window, bool require_response) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw InputError(std::string("malformed JSON: ") + err.what());
  }
  if (!obj.is_object()) throw InputError("dialog record must be a JSON object");

  DialogPair pair;
  try {
    if (obj.contains("context_utterances")) {
      pair.utterances = obj.at("context_utterances").get<std::vector<std::string>>();
    }
    std::vector<FeatureVector> images;
    if (obj.contains("context_image_features")) {
      for (const auto& row : obj.at("context_image_features")) {
        const auto values = row.get<std::vector<double>>();
        images.emplace_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
      }
    }
    pair.context = make_context(pair.utterances, std::move(images), window);
    if (window != 0 && pair.utterances.size() > window) {
      pair.utterances.erase(pair.utterances.begin(), pair.utterances.end() - static_cast<std::ptrdiff_t>(window));
    }
    if (obj.contains("response")) pair.response = tokenize(obj.at("response").get<std::string>());
  } catch (const json::exception& err) {
    throw InputError(std::string("bad dialog record field: ") + err.what());
  }
  if (require_response && pair.response.empty()) throw InputError("dialog record has an empty response");
  return pair;
}

std::vector<DialogPair> parse_corpus(std::istream& in, std::size_t window) {
  std::vector<DialogPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      pairs.push_back(parse_pair(line, window));
    } catch (const InputError& err) {
      throw InputError("corpus line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return pairs;
}

std::vector<DialogPair> load_corpus(const std::string& path, std::size_t window) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, window);
}

void write_corpus(std::ostream& out, const std::vector<DialogPair>& pairs) {
  for (const auto& p : pairs) {
    json images = json::array();
    for (const auto& f : p.context.image_features) images.push_back(std::vector<double>(f.data(), f.data() + f.size()));
    json obj = {{"context_utterances", p.utterances},
                {"context_image_features", images},
                {"response", join(p.response)}};
    out << obj.dump() << '\n';
  }
}

}  // namespace mds
