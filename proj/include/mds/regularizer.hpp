#pragma once

#include <string>

#include "mds/composer.hpp"

namespace mds {

/// Cross-attention reader plus residual MLP, one instance per side.
struct SemanticProjection {
  AttentionWeights attention;
  MlpWeights mlp;

  static SemanticProjection make(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg,
                                 Rng& rng);
};

/// Attends from the latent queries over `rep` and adds the MLP residual.
/// Output is latent.rows() x D whatever rep.rows() is.
Tensor project_semantic(const Tensor& latent, const Tensor& rep, const SemanticProjection& proj,
                        AttentionOptions opts = {});

/// Embeds and encodes the response with the shared encoder.
Tensor encode_ground_truth(std::span<const std::size_t> response_ids, const EmbeddingTable& table,
                           const Encoder& encoder);

/// Squared Frobenius distance between the two semantic representations.
Tensor regularization_loss(const Tensor& truth_semantics, const Tensor& composed_semantics);

/// Shared latent queries with separate composed/ground-truth projections.
struct SemanticRegularizer {
  Tensor latent;  // P_g, N_P x D
  SemanticProjection composed;
  SemanticProjection truth;
  AttentionOptions opts;

  static SemanticRegularizer make(ParameterStore& store, const ModelConfig& cfg, Rng& rng);
  Tensor project_composed(const Tensor& composed_rep) const { return project_semantic(latent, composed_rep, composed, opts); }
  Tensor project_truth(const Tensor& truth_rep) const { return project_semantic(latent, truth_rep, truth, opts); }
};

}  // namespace mds
