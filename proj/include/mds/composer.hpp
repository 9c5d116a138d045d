#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mds/acquisition.hpp"
#include "mds/params.hpp"
#include "mds/tensor.hpp"
#include "mds/text.hpp"

namespace mds {

/// Shared dimensions for every learned component.
struct ModelConfig {
  Eigen::Index d_model = 64;
  int encoder_layers = 2;
  int decoder_layers = 2;
  Eigen::Index latent_queries = 8;
  Eigen::Index mlp_hidden = 128;
  Eigen::Index max_positions = 256;
  /// Context/entity image feature width; 0 disables the image projection.
  Eigen::Index feature_dim = 0;
  bool scale_attention = false;
  /// Relation composition switch; off gives T_c = T_t.
  bool use_relations = true;
  double init_range = 0.08;
};

/// Token plus position lookup tables.
struct EmbeddingTable {
  Tensor token;     // V x D
  Tensor position;  // L_max x D

  static EmbeddingTable make(ParameterStore& store, std::size_t vocab_size, const ModelConfig& cfg, Rng& rng);
  Eigen::Index dim() const { return token.cols(); }
  Eigen::Index max_positions() const { return position.rows(); }
};

/// Rows are token_embedding[id] + position_embedding[first_position + i].
/// Sequences past the position table are truncated with a warning.
Tensor embed_ids(std::span<const std::size_t> ids, const EmbeddingTable& table, Eigen::Index first_position = 0);
Tensor embed_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab, const EmbeddingTable& table);

/// Linear map from the image feature width to D followed by layer norm.
struct ImageProjection {
  LinearWeights fc;
  LayerNormWeights norm;

  static ImageProjection make(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  /// `features` is N_V x feature_dim; returns N_V x D (0 x D when empty).
  Tensor project(const Matrix& features) const;
};

struct EncoderBlock {
  AttentionWeights attention;
  LayerNormWeights norm1;
  MlpWeights mlp;
  LayerNormWeights norm2;
};

/// Post-norm self-attention encoder standing in for a pretrained one.
class Encoder {
 public:
  Encoder() = default;
  Encoder(std::vector<EncoderBlock> blocks, AttentionOptions opts) : blocks_(std::move(blocks)), opts_(opts) {}
  static Encoder make(ParameterStore& store, const ModelConfig& cfg, Rng& rng);

  /// Shape preserving; the identity when there are no blocks.
  Tensor encode(const Tensor& x) const;
  std::size_t depth() const { return blocks_.size(); }

 private:
  std::vector<EncoderBlock> blocks_;
  AttentionOptions opts_;
};

/// "type : value ;" token runs in knowledge order.
std::vector<std::string> linearize_attributes(const AttributeKnowledge& knowledge);
/// linearize_tuple followed by the model tokenizer.
std::vector<std::string> tuple_tokens(const RelationTuple& t);

struct FusionWeights {
  LinearWeights attribute;  // W_t, B_t
  LinearWeights relation;   // W_h, B_h
  Tensor query;             // D x 1

  static FusionWeights make(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
};

struct FusionResult {
  Tensor r_t;  // N_b x 1
  Tensor r_h;  // N_b x 1
  Tensor composed;
};

/// Scores each position of both inputs against the query vector, softmaxes
/// the pair, and mixes rows convexly.
FusionResult fuse(const Tensor& attribute_rep, const Tensor& relation_rep, const FusionWeights& w);

struct ComposedRepresentation {
  Tensor knowledge_embedding;  // E_k, N_K x D
  Tensor attribute_rep;        // T_t, N_b x D
  Tensor tuple_rep;            // T_h, N_h x D (undefined when N_h = 0)
  Tensor reorganized;          // reorganized T_h, N_b x D (undefined when skipped)
  Tensor relation_attention;   // N_b x N_h (undefined when skipped)
  Tensor r_t;
  Tensor r_h;
  Tensor composed;             // T_c
  Eigen::Index n_knowledge = 0;
  Eigen::Index n_text = 0;
  Eigen::Index n_visual = 0;

  Eigen::Index total() const { return n_knowledge + n_text + n_visual; }
  bool relations_used() const { return reorganized.defined(); }
};

/// Token ids and features of one context, ready for the composer.
struct PreparedContext {
  std::vector<std::size_t> knowledge_ids;
  std::vector<std::size_t> text_ids;
  Matrix image_features;  // N_V x feature_dim
  std::vector<std::vector<std::size_t>> tuple_ids;
};

/// Embedding, encoding and both composition stages.
class Composer {
 public:
  Composer() = default;
  static Composer make(ParameterStore& store, std::size_t vocab_size, const ModelConfig& cfg, Rng& rng);

  const EmbeddingTable& embedding() const { return embedding_; }
  const Encoder& encoder() const { return encoder_; }
  const ImageProjection& image_projection() const { return image_; }
  const AttentionWeights& relation_attention() const { return relation_; }
  const FusionWeights& fusion() const { return fusion_; }
  AttentionOptions attention_options() const { return opts_; }

  /// [E_k; E_t; E_v] through the encoder; image rows continue the text
  /// positions.
  Tensor compose_attributes(const Tensor& knowledge, const Tensor& text, const Tensor& visual) const;
  /// One mean-pooled encoded row per tuple.
  Tensor encode_relation_tuples(const std::vector<std::vector<std::size_t>>& tuples) const;
  /// Cross-attention from T_t (queries) over T_h (keys/values). Throws
  /// ShapeError when T_h has no rows.
  AttentionResult reorganize_relations(const Tensor& attribute_rep, const Tensor& tuple_rep) const;

  ComposedRepresentation compose(const PreparedContext& ctx, bool use_relations) const;

 private:
  EmbeddingTable embedding_;
  ImageProjection image_;
  Encoder encoder_;
  AttentionWeights relation_;
  FusionWeights fusion_;
  AttentionOptions opts_;
  bool has_images_ = false;
};

}  // namespace mds
