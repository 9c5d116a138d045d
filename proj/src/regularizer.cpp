#include "mds/regularizer.hpp"

#include "mds/error.hpp"

namespace mds {

SemanticProjection SemanticProjection::make(ParameterStore& store, const std::string& prefix,
                                            const ModelConfig& cfg, Rng& rng) {
  return {make_attention(store, prefix + ".attention", cfg.d_model, rng, cfg.init_range),
          make_mlp(store, prefix + ".mlp", cfg.d_model, cfg.mlp_hidden, rng, cfg.init_range)};
}

Tensor project_semantic(const Tensor& latent, const Tensor& rep, const SemanticProjection& proj,
                        AttentionOptions opts) {
  if (rep.rows() == 0) throw ShapeError("project_semantic: empty representation");
  const Tensor read = cross_attention(latent, rep, proj.attention, opts).output;
  return add(read, mlp(read, proj.mlp));
}

Tensor encode_ground_truth(std::span<const std::size_t> response_ids, const EmbeddingTable& table,
                           const Encoder& encoder) {
  if (response_ids.empty()) throw InputError("encode_ground_truth: empty response");
  return encoder.encode(embed_ids(response_ids, table));
}

Tensor regularization_loss(const Tensor& truth_semantics, const Tensor& composed_semantics) {
  return frobenius_distance_sq(truth_semantics, composed_semantics);
}

SemanticRegularizer SemanticRegularizer::make(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
  SemanticRegularizer r;
  r.latent = store.create("semantic.latent", cfg.latent_queries, cfg.d_model, rng, cfg.init_range);
  r.composed = SemanticProjection::make(store, "semantic.composed", cfg, rng);
  r.truth = SemanticProjection::make(store, "semantic.truth", cfg, rng);
  r.opts = {.causal = false, .scaled = cfg.scale_attention};
  return r;
}

}  // namespace mds
