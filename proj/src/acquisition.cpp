#include "mds/acquisition.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "mds/error.hpp"
#include "mds/log.hpp"
#include "mds/text.hpp"

namespace mds {

namespace {

std::vector<std::string> lowered(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    for (auto& piece : tokenize(t)) out.push_back(std::move(piece));
  }
  return out;
}

bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

auto item_key(const KnowledgeItem& item) {
  return std::tie(item.source_entity, item.pair.type, item.pair.value);
}

void sort_block(std::vector<KnowledgeItem>& items) {
  std::sort(items.begin(), items.end(),
            [](const KnowledgeItem& a, const KnowledgeItem& b) { return item_key(a) < item_key(b); });
  items.erase(std::unique(items.begin(), items.end(),
                          [](const KnowledgeItem& a, const KnowledgeItem& b) {
                            return item_key(a) == item_key(b);
                          }),
              items.end());
}

AttributeKnowledge collect(const KnowledgeBase& kb, const std::vector<std::string>& names, Provenance p) {
  AttributeKnowledge out;
  for (const auto& name : names) {
    const Entity* e = kb.find(name);
    if (!e) continue;
    for (const auto& pair : e->attributes) out.items.push_back({name, pair, p});
  }
  sort_block(out.items);
  return out;
}

}  // namespace

std::vector<std::string> AttributeKnowledge::entities() const {
  std::vector<std::string> out;
  for (const auto& item : items) {
    if (std::find(out.begin(), out.end(), item.source_entity) == out.end()) out.push_back(item.source_entity);
  }
  return out;
}

std::vector<std::string> mentioned_entities(const DialogContext& ctx, const KnowledgeBase& kb) {
  const auto context = lowered(ctx.text_tokens);
  std::vector<std::string> names;
  for (const auto& [name, entity] : kb.entities()) {
    if (contains_run(context, tokenize(name))) names.push_back(name);
  }
  return names;
}

AttributeKnowledge acquire_text_attributes(const DialogContext& ctx, const KnowledgeBase& kb) {
  return collect(kb, mentioned_entities(ctx, kb), Provenance::textual);
}

std::optional<double> entity_similarity(const FeatureVector& feature, const Entity& entity) {
  if (entity.image_features.empty()) return std::nullopt;
  const double fn = feature.norm();
  if (fn == 0.0) throw std::domain_error("cosine similarity undefined for a zero-norm context feature");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& img : entity.image_features) {
    if (img.size() != feature.size()) {
      throw ShapeError("feature dimension " + std::to_string(feature.size()) + " vs entity '" +
                       entity.name + "' image dimension " + std::to_string(img.size()));
    }
    const double in = img.norm();
    if (in == 0.0) {
      throw std::domain_error("cosine similarity undefined for a zero-norm image of '" + entity.name + "'");
    }
    best = std::max(best, feature.dot(img) / (fn * in));
  }
  return best;
}

std::vector<std::string> visually_related_entities(const DialogContext& ctx, const KnowledgeBase& kb,
                                                   const AcquisitionConfig& cfg) {
  std::set<std::string> selected;
  for (std::size_t i = 0; i < ctx.image_features.size(); ++i) {
    const auto& feature = ctx.image_features[i];
    for (const auto& [name, entity] : kb.entities()) {
      std::optional<double> sim;
      try {
        sim = entity_similarity(feature, entity);
      } catch (const std::domain_error& err) {
        warn("context image #" + std::to_string(i) + ": " + err.what() + "; skipped");
        continue;
      }
      if (sim && *sim > cfg.epsilon) selected.insert(name);
    }
  }
  return {selected.begin(), selected.end()};
}

AttributeKnowledge acquire_visual_attributes(const DialogContext& ctx, const KnowledgeBase& kb,
                                             const AcquisitionConfig& cfg) {
  return collect(kb, visually_related_entities(ctx, kb, cfg), Provenance::visual);
}

AttributeKnowledge merge_attribute_knowledge(const AttributeKnowledge& text_k,
                                             const AttributeKnowledge& visual_k) {
  AttributeKnowledge out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto* block : {&text_k, &visual_k}) {
    for (const auto& item : block->items) {
      if (seen.emplace(item.source_entity, item.pair.type, item.pair.value).second) out.items.push_back(item);
    }
  }
  return out;
}

std::set<RelationTuple> walk_relations(const KnowledgeGraph& graph, const std::set<std::string>& seeds,
                                       const AcquisitionConfig& cfg) {
  if (cfg.max_hops < 1) throw InputError("max_hops must be at least 1");
  std::set<RelationTuple> out;
  std::vector<std::string> path;
  std::set<std::string> on_path;

  std::function<void(const std::string&, int)> extend = [&](const std::string& node, int depth) {
    bool extended = false;
    if (depth < cfg.max_hops) {
      for (const auto& edge : graph.out_edges(node)) {
        if (on_path.count(edge.tail)) continue;
        extended = true;
        path.push_back(edge.label);
        path.push_back(edge.tail);
        on_path.insert(edge.tail);
        extend(edge.tail, depth + 1);
        on_path.erase(edge.tail);
        path.resize(path.size() - 2);
      }
    }
    if (!extended && depth >= 1) out.insert(RelationTuple{path});
  };

  for (const auto& seed : seeds) {
    if (!graph.contains(seed)) {
      warn("walk seed '" + seed + "' is not a graph node; skipped");
      continue;
    }
    path = {seed};
    on_path = {seed};
    extend(seed, 0);
  }
  return out;
}

std::vector<RelationTuple> prioritize_tuples(const std::set<RelationTuple>& tuples,
                                             std::optional<std::size_t> cap) {
  std::vector<RelationTuple> ordered(tuples.begin(), tuples.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const RelationTuple& a, const RelationTuple& b) {
    return a.entries.size() < b.entries.size();
  });
  if (cap && ordered.size() > *cap) ordered.resize(*cap);
  return ordered;
}

std::vector<std::string> linearize_tuple(const RelationTuple& t) {
  std::vector<std::string> out;
  for (const auto& entry : t.entries) {
    std::istringstream words(entry);
    std::string w;
    while (words >> w) out.push_back(w);
  }
  return out;
}

ContextKnowledge acquire_knowledge(const DialogContext& ctx, const KnowledgeBase& kb,
                                   const KnowledgeGraph& graph, const AcquisitionConfig& cfg) {
  const auto textual = mentioned_entities(ctx, kb);
  const auto visual = visually_related_entities(ctx, kb, cfg);

  ContextKnowledge out;
  out.attributes = merge_attribute_knowledge(collect(kb, textual, Provenance::textual),
                                             collect(kb, visual, Provenance::visual));
  std::set<std::string> seeds(textual.begin(), textual.end());
  seeds.insert(visual.begin(), visual.end());
  out.tuples = prioritize_tuples(walk_relations(graph, seeds, cfg), cfg.max_tuples);
  return out;
}

}  // namespace mds
