#include "mds/kb.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mds/error.hpp"

namespace mds {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto* ws = " \t\r\n\f\v";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

void KnowledgeBase::add(Entity entity) {
  if (entities_.count(entity.name)) {
    throw InputError("duplicate entity name '" + entity.name + "'");
  }
  for (const auto& f : entity.image_features) {
    const auto dim = static_cast<std::size_t>(f.size());
    if (feature_dim_ == 0) feature_dim_ = dim;
    if (dim != feature_dim_ || dim == 0) {
      throw InputError("entity '" + entity.name + "': image feature dimension " +
                       std::to_string(dim) + " differs from " + std::to_string(feature_dim_));
    }
  }
  auto name = entity.name;
  entities_.emplace(std::move(name), std::move(entity));
}

const Entity* KnowledgeBase::find(const std::string& name) const {
  auto it = entities_.find(name);
  return it == entities_.end() ? nullptr : &it->second;
}

namespace {

std::string where(std::size_t index, const std::string& name) {
  std::string s = "entity #" + std::to_string(index);
  if (!name.empty()) s += " ('" + name + "')";
  return s;
}

Entity parse_entity(const json& obj, std::size_t index) {
  if (!obj.is_object()) throw InputError(where(index, "") + ": expected an object");
  auto name_it = obj.find("name");
  if (name_it == obj.end() || !name_it->is_string()) {
    throw InputError(where(index, "") + ": missing string field 'name'");
  }
  Entity e;
  e.name = trim(name_it->get<std::string>());
  if (e.name.empty()) throw InputError(where(index, "") + ": empty name");

  if (auto it = obj.find("attributes"); it != obj.end()) {
    if (!it->is_array()) throw InputError(where(index, e.name) + ": 'attributes' must be an array");
    std::size_t k = 0;
    for (const auto& pair : *it) {
      if (!pair.is_object() || !pair.contains("type") || !pair.contains("value") ||
          !pair["type"].is_string() || !pair["value"].is_string()) {
        throw InputError(where(index, e.name) + ": attribute #" + std::to_string(k) +
                         " must be {\"type\": string, \"value\": string}");
      }
      AttributeValuePair avp{trim(pair["type"].get<std::string>()),
                             trim(pair["value"].get<std::string>())};
      if (avp.type.empty() || avp.value.empty()) {
        throw InputError(where(index, e.name) + ": attribute #" + std::to_string(k) +
                         " has an empty type or value");
      }
      e.attributes.push_back(std::move(avp));
      ++k;
    }
  }

  if (auto it = obj.find("image_features"); it != obj.end()) {
    if (!it->is_array()) throw InputError(where(index, e.name) + ": 'image_features' must be an array");
    for (const auto& row : *it) {
      if (!row.is_array()) throw InputError(where(index, e.name) + ": image feature must be an array");
      FeatureVector v(static_cast<Eigen::Index>(row.size()));
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (!row[j].is_number()) throw InputError(where(index, e.name) + ": non-numeric image feature");
        v[static_cast<Eigen::Index>(j)] = row[j].get<double>();
      }
      e.image_features.push_back(std::move(v));
    }
  }
  return e;
}

}  // namespace

KnowledgeBase parse_kb(std::istream& source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& err) {
    throw InputError(std::string("malformed KB document: ") + err.what());
  }
  if (!doc.is_array()) throw InputError("malformed KB document: top level must be an array");

  KnowledgeBase kb;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    Entity e = parse_entity(doc[i], i);
    const std::string name = e.name;
    try {
      kb.add(std::move(e));
    } catch (const InputError& err) {
      throw InputError(where(i, name) + ": " + err.what());
    }
  }
  return kb;
}

KnowledgeBase load_kb(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open KB file '" + path + "'");
  return parse_kb(in);
}

void write_kb(std::ostream& out, const KnowledgeBase& kb) {
  json doc = json::array();
  for (const auto& [name, e] : kb.entities()) {
    json attrs = json::array();
    for (const auto& a : e.attributes) attrs.push_back({{"type", a.type}, {"value", a.value}});
    json feats = json::array();
    for (const auto& f : e.image_features) feats.push_back(std::vector<double>(f.data(), f.data() + f.size()));
    doc.push_back({{"name", name}, {"attributes", attrs}, {"image_features", feats}});
  }
  out << doc.dump() << '\n';
}

const std::vector<OutEdge>& KnowledgeGraph::out_edges(const std::string& node) const {
  static const std::vector<OutEdge> none;
  auto it = adjacency_.find(node);
  return it == adjacency_.end() ? none : it->second;
}

KnowledgeGraph build_graph(const KnowledgeBase& kb) {
  KnowledgeGraph g;
  for (const auto& [name, e] : kb.entities()) {
    const std::string head = trim(name);
    g.nodes_.insert(head);
    for (const auto& a : e.attributes) {
      const std::string tail = trim(a.value);
      g.nodes_.insert(tail);
      g.edges_.insert({head, trim(a.type), tail});
    }
  }
  for (const auto& t : g.edges_) g.adjacency_[t.head].push_back({t.label, t.tail});
  // std::set iteration already yields each head's edges in (label, tail) order.
  return g;
}

}  // namespace mds
