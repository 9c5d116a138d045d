#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace mds {

using FeatureVector = Eigen::VectorXd;

struct AttributeValuePair {
  std::string type;
  std::string value;

  auto operator<=>(const AttributeValuePair&) const = default;
};

struct Entity {
  std::string name;
  std::vector<AttributeValuePair> attributes;
  std::vector<FeatureVector> image_features;
};

/// Entities keyed by name. Immutable once parsed; feature_dim is 0 when no
/// entity carries image features.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  /// Throws InputError on a duplicate name or a feature dimension that
  /// disagrees with the first one seen.
  void add(Entity entity);

  const std::map<std::string, Entity>& entities() const { return entities_; }
  const Entity* find(const std::string& name) const;
  std::size_t size() const { return entities_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }

 private:
  std::map<std::string, Entity> entities_;
  std::size_t feature_dim_ = 0;
};

/// Parses the KB JSON document: a top-level array of
/// {"name", "attributes": [{"type", "value"}], "image_features": [[...]]}.
KnowledgeBase parse_kb(std::istream& source);
KnowledgeBase load_kb(const std::string& path);
void write_kb(std::ostream& out, const KnowledgeBase& kb);

struct Triplet {
  std::string head;
  std::string label;
  std::string tail;

  auto operator<=>(const Triplet&) const = default;
};

struct OutEdge {
  std::string label;
  std::string tail;

  auto operator<=>(const OutEdge&) const = default;
};

/// Directed labeled graph: entity names are head nodes, attribute values are
/// tail nodes, and a value equal to an entity name is that entity's node.
class KnowledgeGraph {
 public:
  const std::set<std::string>& nodes() const { return nodes_; }
  const std::set<Triplet>& edges() const { return edges_; }
  bool contains(const std::string& node) const { return nodes_.count(node) > 0; }

  /// Out-edges sorted by (label, tail); empty for dead-end nodes.
  const std::vector<OutEdge>& out_edges(const std::string& node) const;
  std::size_t out_degree(const std::string& node) const { return out_edges(node).size(); }

  friend KnowledgeGraph build_graph(const KnowledgeBase& kb);

 private:
  std::set<std::string> nodes_;
  std::set<Triplet> edges_;
  std::map<std::string, std::vector<OutEdge>> adjacency_;
};

KnowledgeGraph build_graph(const KnowledgeBase& kb);

/// Strips leading/trailing whitespace; node identity uses trimmed strings.
std::string trim(const std::string& s);

}  // namespace mds
