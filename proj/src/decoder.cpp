#include "mds/decoder.hpp"

#include "mds/error.hpp"

namespace mds {

Decoder Decoder::make(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
  Decoder d;
  d.opts_ = {.causal = false, .scaled = cfg.scale_attention};
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    DecoderBlock b;
    b.self_attention = make_attention(store, p + ".self", cfg.d_model, rng, cfg.init_range);
    b.norm1 = make_layer_norm(store, p + ".norm1", cfg.d_model);
    b.knowledge = make_attention(store, p + ".knowledge", cfg.d_model, rng, cfg.init_range);
    b.norm2 = make_layer_norm(store, p + ".norm2", cfg.d_model);
    b.cross = make_attention(store, p + ".cross", cfg.d_model, rng, cfg.init_range);
    b.norm3 = make_layer_norm(store, p + ".norm3", cfg.d_model);
    b.mlp = make_mlp(store, p + ".mlp", cfg.d_model, cfg.mlp_hidden, rng, cfg.init_range);
    b.norm4 = make_layer_norm(store, p + ".norm4", cfg.d_model);
    d.blocks_.push_back(std::move(b));
  }
  return d;
}

Tensor Decoder::run(const Tensor& composed, const Tensor& knowledge, const Tensor& prefix_embeddings) const {
  AttentionOptions masked = opts_;
  masked.causal = true;
  Tensor h = prefix_embeddings;
  for (const auto& b : blocks_) {
    h = layer_norm(add(h, cross_attention(h, h, b.self_attention, masked).output), b.norm1);
    if (knowledge.rows() > 0) {
      h = layer_norm(add(h, cross_attention(h, knowledge, b.knowledge, opts_).output), b.norm2);
    }
    h = layer_norm(add(h, cross_attention(h, composed, b.cross, opts_).output), b.norm3);
    h = layer_norm(add(h, mlp(h, b.mlp)), b.norm4);
  }
  return h;
}

Tensor decode_step(const Decoder& decoder, const EmbeddingTable& table, const Tensor& composed,
                   const Tensor& knowledge, std::span<const std::size_t> prefix) {
  if (prefix.empty()) throw InputError("decode_step: empty prefix");
  const Tensor states = decoder.run(composed, knowledge, embed_ids(prefix, table));
  return slice_rows(states, states.rows() - 1, 1);
}

SemanticEnhancer SemanticEnhancer::make(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
  return {make_attention(store, "enhance.attention", cfg.d_model, rng, cfg.init_range),
          make_layer_norm(store, "enhance.norm", cfg.d_model),
          {.causal = false, .scaled = cfg.scale_attention}};
}

Tensor SemanticEnhancer::enhance(const Tensor& states, const Tensor& semantics) const {
  return layer_norm(add(states, cross_attention(states, semantics, attention, opts).output), norm);
}

OutputHead OutputHead::make(ParameterStore& store, std::size_t vocab_size, const ModelConfig& cfg, Rng& rng) {
  return {{store.create("head.weight", cfg.d_model, static_cast<Eigen::Index>(vocab_size), rng, cfg.init_range),
           store.create_constant("head.bias", 1, static_cast<Eigen::Index>(vocab_size), 0.0)}};
}

Tensor total_loss(const Tensor& ce, const Tensor& reg, const ParameterStore& params, const LossWeights& w) {
  Tensor loss = add(scale(ce, w.lambda), scale(reg, w.gamma));
  if (w.beta != 0.0) loss = add(loss, scale(params.squared_norm(), w.beta));
  return loss;
}

}  // namespace mds
