#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mds/kb.hpp"

namespace mds {

/// Multimodal context: concatenated utterance tokens plus context image
/// features (possibly none).
struct DialogContext {
  std::vector<std::string> text_tokens;
  std::vector<FeatureVector> image_features;
};

enum class Provenance { textual, visual };

struct KnowledgeItem {
  std::string source_entity;
  AttributeValuePair pair;
  Provenance provenance = Provenance::textual;
};

/// Ordered attribute knowledge. Within a provenance block items are sorted by
/// (source_entity, type, value).
struct AttributeKnowledge {
  std::vector<KnowledgeItem> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  /// Distinct source entities in first-appearance order.
  std::vector<std::string> entities() const;
};

/// Alternating [node, label, node, ..., node] path through the graph.
struct RelationTuple {
  std::vector<std::string> entries;

  std::size_t hops() const { return entries.size() / 2; }
  auto operator<=>(const RelationTuple&) const = default;
};

struct AcquisitionConfig {
  double epsilon = 0.8;
  int max_hops = 2;
  /// Optional cap on tuples per context; unset means unlimited.
  std::optional<std::size_t> max_tuples;
};

/// Entity names whose tokenized form occurs as a contiguous run of
/// ctx.text_tokens (case-insensitive), sorted.
std::vector<std::string> mentioned_entities(const DialogContext& ctx, const KnowledgeBase& kb);

AttributeKnowledge acquire_text_attributes(const DialogContext& ctx, const KnowledgeBase& kb);

/// Max cosine similarity between `feature` and the entity's images; nullopt
/// when the entity has no images. Throws std::domain_error on a zero-norm
/// vector and ShapeError on mismatched dimensions.
std::optional<double> entity_similarity(const FeatureVector& feature, const Entity& entity);

/// Names of entities selected by any context image (similarity > epsilon).
std::vector<std::string> visually_related_entities(const DialogContext& ctx, const KnowledgeBase& kb,
                                                   const AcquisitionConfig& cfg);

AttributeKnowledge acquire_visual_attributes(const DialogContext& ctx, const KnowledgeBase& kb,
                                             const AcquisitionConfig& cfg);

/// Text block first, then visual; duplicates on (entity, type, value) keep
/// their first occurrence.
AttributeKnowledge merge_attribute_knowledge(const AttributeKnowledge& text_k,
                                             const AttributeKnowledge& visual_k);

/// All maximal simple paths of 1..max_hops edges starting at each seed.
/// Seeds missing from the graph are skipped with a warning.
std::set<RelationTuple> walk_relations(const KnowledgeGraph& graph, const std::set<std::string>& seeds,
                                       const AcquisitionConfig& cfg);

/// Orders tuples shorter-first then lexicographically and keeps at most `cap`.
std::vector<RelationTuple> prioritize_tuples(const std::set<RelationTuple>& tuples,
                                             std::optional<std::size_t> cap);

/// Whitespace-split tokens of every entry, in order.
std::vector<std::string> linearize_tuple(const RelationTuple& t);

/// Everything the composer needs about one context.
struct ContextKnowledge {
  AttributeKnowledge attributes;
  std::vector<RelationTuple> tuples;
};

ContextKnowledge acquire_knowledge(const DialogContext& ctx, const KnowledgeBase& kb,
                                   const KnowledgeGraph& graph, const AcquisitionConfig& cfg);

}  // namespace mds
