#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mds/corpus.hpp"
#include "mds/decoder.hpp"
#include "mds/regularizer.hpp"

namespace mds {

/// A dialog pair with its acquired knowledge resolved to token ids.
struct PreparedPair {
  ContextKnowledge knowledge;
  PreparedContext context;
  std::vector<std::size_t> response_ids;
};

/// Which semantic representation feeds the decoder enhancement: the ground
/// truth side during training, the composed side at inference.
enum class EnhanceSource { truth, composed };

struct ForwardResult {
  ComposedRepresentation composition;
  Tensor composed_semantics;  // N_P x D
  Tensor truth_semantics;     // N_P x D
  Tensor probs;               // (N_R + 1) x V, teacher forced
  std::vector<std::size_t> targets;
  Tensor ce;
  Tensor reg;
  Tensor loss;
};

struct DecodeOptions {
  std::size_t max_len = 32;
  /// 1 is greedy.
  std::size_t beam = 1;
};

/// Parses "greedy" or "beam:k".
DecodeOptions parse_strategy(const std::string& strategy, std::size_t max_len);

/// The full response generator: composer, semantic regularizer, decoder,
/// enhancer and output head over one parameter store.
class Model {
 public:
  Model(const ModelConfig& cfg, Vocabulary vocab, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const Composer& composer() const { return composer_; }
  const SemanticRegularizer& regularizer() const { return regularizer_; }
  const Decoder& decoder() const { return decoder_; }
  const SemanticEnhancer& enhancer() const { return enhancer_; }
  const OutputHead& head() const { return head_; }

  PreparedContext prepare_context(const DialogContext& ctx, const ContextKnowledge& knowledge) const;
  PreparedPair prepare(const DialogPair& pair, const KnowledgeBase& kb, const KnowledgeGraph& graph,
                       const AcquisitionConfig& acq) const;

  ComposedRepresentation compose(const PreparedContext& ctx) const;
  Tensor truth_representation(std::span<const std::size_t> response_ids) const;

  /// Teacher-forced pass over [begin, response...] predicting [response..., end].
  ForwardResult forward(const PreparedPair& pair, const LossWeights& weights,
                        EnhanceSource source = EnhanceSource::truth) const;

  /// Token ids (without begin/end markers).
  std::vector<std::size_t> generate(const PreparedContext& ctx, const DecodeOptions& opts) const;

  /// Writes parameters to `path` and vocabulary + config (plus `extra`
  /// under "training") to `path.meta.json`.
  void save(const std::string& path, const nlohmann::json& extra = nullptr) const;
  static Model load(const std::string& path);
  /// The "training" object stored by save(), or null.
  static nlohmann::json load_training_meta(const std::string& path);

 private:
  ModelConfig cfg_;
  Vocabulary vocab_;
  ParameterStore params_;
  Composer composer_;
  SemanticRegularizer regularizer_;
  Decoder decoder_;
  SemanticEnhancer enhancer_;
  OutputHead head_;
};

std::string meta_path(const std::string& checkpoint_path);

}  // namespace mds
