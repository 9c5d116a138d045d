#pragma once

#include <string>
#include <vector>

#include "mds/composer.hpp"

namespace mds {

struct DecoderBlock {
  AttentionWeights self_attention;
  LayerNormWeights norm1;
  AttentionWeights knowledge;  // over E_k
  LayerNormWeights norm2;
  AttentionWeights cross;      // over T_c
  LayerNormWeights norm3;
  MlpWeights mlp;
  LayerNormWeights norm4;
};

/// Post-norm decoder with a knowledge sub-layer between masked self-attention
/// and encoder-decoder attention.
class Decoder {
 public:
  Decoder() = default;
  static Decoder make(ParameterStore& store, const ModelConfig& cfg, Rng& rng);

  /// States for every prefix position at once (causally masked), so row j
  /// depends only on prefix rows 0..j. The knowledge sub-layer is skipped
  /// when `knowledge` has no rows.
  Tensor run(const Tensor& composed, const Tensor& knowledge, const Tensor& prefix_embeddings) const;

  std::size_t depth() const { return blocks_.size(); }
  const std::vector<DecoderBlock>& blocks() const { return blocks_; }

 private:
  std::vector<DecoderBlock> blocks_;
  AttentionOptions opts_;
};

/// Latent state for the next token: the final-block row at the last prefix
/// position. Throws InputError on an empty prefix.
Tensor decode_step(const Decoder& decoder, const EmbeddingTable& table, const Tensor& composed,
                   const Tensor& knowledge, std::span<const std::size_t> prefix);

/// LN(z + softmax((z Wq)(S Wk)^T)(S Wv)) row-wise, S the semantic rows.
struct SemanticEnhancer {
  AttentionWeights attention;
  LayerNormWeights norm;
  AttentionOptions opts;

  static SemanticEnhancer make(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Tensor enhance(const Tensor& states, const Tensor& semantics) const;
};

struct OutputHead {
  LinearWeights projection;  // W_y: D x V, b_y: 1 x V

  static OutputHead make(ParameterStore& store, std::size_t vocab_size, const ModelConfig& cfg, Rng& rng);
  /// Row-wise token distributions.
  Tensor predict(const Tensor& states) const { return softmax_rows(linear(states, projection)); }
};

struct LossWeights {
  double lambda = 1.0;
  double gamma = 0.1;
  double beta = 1e-6;
};

/// lambda * ce + gamma * reg + beta * sum of squares of every parameter.
Tensor total_loss(const Tensor& ce, const Tensor& reg, const ParameterStore& params, const LossWeights& w);

}  // namespace mds
