#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mds/corpus.hpp"

namespace mds {

enum class QuestionFamily { attribute, relation, open };

struct SynthOptions {
  /// Attach unit-vector image features to entities and ask some attribute
  /// questions through a context image instead of the entity name.
  bool with_images = false;
  std::size_t feature_dim = 16;
  double image_noise = 0.05;
  /// Relative weights of attribute, relation and open questions.
  std::array<double, 3> family_weights{0.4, 0.4, 0.2};
  /// Relation questions cycle through a shuffled list of chain heads, so no
  /// head repeats until all have been used.
  bool distinct_relation_heads = true;
};

struct SyntheticCorpus {
  KnowledgeBase kb;
  std::vector<DialogPair> pairs;
  std::vector<QuestionFamily> families;  // parallel to pairs
};

/// Seeded toy knowledge base and dialogs. The first half of the entities
/// are chain heads, each "near" exactly one entity of the second half.
/// Throws InputError when n_entities < 4.
SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, std::size_t n_entities, std::size_t n_pairs,
                                      const SynthOptions& opts = {});

}  // namespace mds
