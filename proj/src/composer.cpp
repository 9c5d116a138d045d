#include "mds/composer.hpp"

#include <array>

#include "mds/error.hpp"
#include "mds/log.hpp"

namespace mds {

EmbeddingTable EmbeddingTable::make(ParameterStore& store, std::size_t vocab_size, const ModelConfig& cfg,
                                    Rng& rng) {
  return {store.create("embed.token", static_cast<Eigen::Index>(vocab_size), cfg.d_model, rng, cfg.init_range),
          store.create("embed.position", cfg.max_positions, cfg.d_model, rng, cfg.init_range)};
}

Tensor embed_ids(std::span<const std::size_t> ids, const EmbeddingTable& table, Eigen::Index first_position) {
  const Eigen::Index available = std::max<Eigen::Index>(table.max_positions() - first_position, 0);
  auto n = static_cast<Eigen::Index>(ids.size());
  if (n > available) {
    warn("sequence of " + std::to_string(n) + " tokens truncated to " + std::to_string(available) + " positions");
    n = available;
  }
  if (n == 0) return Tensor::zeros(0, table.dim());
  const auto kept = ids.first(static_cast<std::size_t>(n));
  return add(gather_rows(table.token, kept), slice_rows(table.position, first_position, n));
}

Tensor embed_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab, const EmbeddingTable& table) {
  const auto ids = vocab.encode(tokens);
  return embed_ids(ids, table);
}

ImageProjection ImageProjection::make(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
  return {make_linear(store, "image.fc", cfg.feature_dim, cfg.d_model, rng, cfg.init_range),
          make_layer_norm(store, "image.norm", cfg.d_model)};
}

Tensor ImageProjection::project(const Matrix& features) const {
  if (features.rows() == 0) return Tensor::zeros(0, fc.weight.cols());
  if (features.cols() != fc.weight.rows()) {
    throw ShapeError("image feature width " + std::to_string(features.cols()) + " but projection expects " +
                     std::to_string(fc.weight.rows()));
  }
  return layer_norm(linear(Tensor(features), fc), norm);
}

Encoder Encoder::make(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
  std::vector<EncoderBlock> blocks;
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    blocks.push_back({make_attention(store, p + ".attention", cfg.d_model, rng, cfg.init_range),
                      make_layer_norm(store, p + ".norm1", cfg.d_model),
                      make_mlp(store, p + ".mlp", cfg.d_model, cfg.mlp_hidden, rng, cfg.init_range),
                      make_layer_norm(store, p + ".norm2", cfg.d_model)});
  }
  return Encoder(std::move(blocks), {.causal = false, .scaled = cfg.scale_attention});
}

Tensor Encoder::encode(const Tensor& x) const {
  Tensor h = x;
  for (const auto& block : blocks_) {
    h = layer_norm(add(h, cross_attention(h, h, block.attention, opts_).output), block.norm1);
    h = layer_norm(add(h, mlp(h, block.mlp)), block.norm2);
  }
  return h;
}

std::vector<std::string> linearize_attributes(const AttributeKnowledge& knowledge) {
  std::vector<std::string> out;
  for (const auto& item : knowledge.items) {
    for (auto& t : tokenize(item.pair.type)) out.push_back(std::move(t));
    out.emplace_back(":");
    for (auto& t : tokenize(item.pair.value)) out.push_back(std::move(t));
    out.emplace_back(";");
  }
  return out;
}

std::vector<std::string> tuple_tokens(const RelationTuple& t) {
  std::vector<std::string> out;
  for (const auto& word : linearize_tuple(t)) {
    for (auto& piece : tokenize(word)) out.push_back(std::move(piece));
  }
  return out;
}

FusionWeights FusionWeights::make(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
  return {make_linear(store, "fusion.attribute", cfg.d_model, cfg.d_model, rng, cfg.init_range),
          make_linear(store, "fusion.relation", cfg.d_model, cfg.d_model, rng, cfg.init_range),
          store.create("fusion.query", cfg.d_model, 1, rng, cfg.init_range)};
}

FusionResult fuse(const Tensor& attribute_rep, const Tensor& relation_rep, const FusionWeights& w) {
  if (attribute_rep.rows() != relation_rep.rows() || attribute_rep.cols() != relation_rep.cols()) {
    throw ShapeError("fuse: representations differ in shape");
  }
  const Tensor score_t = matmul(tanh(linear(attribute_rep, w.attribute)), w.query);
  const Tensor score_h = matmul(tanh(linear(relation_rep, w.relation)), w.query);
  const std::array<Tensor, 2> scores{score_t, score_h};
  const Tensor r = softmax_rows(concat_cols(scores));
  FusionResult out;
  out.r_t = slice_cols(r, 0, 1);
  out.r_h = slice_cols(r, 1, 1);
  out.composed = add(scale_rows(out.r_t, attribute_rep), scale_rows(out.r_h, relation_rep));
  return out;
}

Composer Composer::make(ParameterStore& store, std::size_t vocab_size, const ModelConfig& cfg, Rng& rng) {
  Composer c;
  c.opts_ = {.causal = false, .scaled = cfg.scale_attention};
  c.embedding_ = EmbeddingTable::make(store, vocab_size, cfg, rng);
  if (cfg.feature_dim > 0) {
    c.image_ = ImageProjection::make(store, cfg, rng);
    c.has_images_ = true;
  }
  c.encoder_ = Encoder::make(store, cfg, rng);
  c.relation_ = make_attention(store, "relation.attention", cfg.d_model, rng, cfg.init_range);
  c.fusion_ = FusionWeights::make(store, cfg, rng);
  return c;
}

Tensor Composer::compose_attributes(const Tensor& knowledge, const Tensor& text, const Tensor& visual) const {
  const std::array<Tensor, 3> parts{knowledge, text, visual};
  const Tensor stacked = concat_rows(parts);
  if (stacked.rows() == 0) throw ShapeError("compose_attributes: empty context");
  return encoder_.encode(stacked);
}

Tensor Composer::encode_relation_tuples(const std::vector<std::vector<std::size_t>>& tuples) const {
  if (tuples.empty()) return Tensor::zeros(0, embedding_.dim());
  std::vector<Tensor> rows;
  rows.reserve(tuples.size());
  for (const auto& ids : tuples) rows.push_back(mean_rows(encoder_.encode(embed_ids(ids, embedding_))));
  return concat_rows(rows);
}

AttentionResult Composer::reorganize_relations(const Tensor& attribute_rep, const Tensor& tuple_rep) const {
  if (tuple_rep.rows() == 0) throw ShapeError("reorganize_relations: no relation tuples");
  return cross_attention(attribute_rep, tuple_rep, relation_, opts_);
}

ComposedRepresentation Composer::compose(const PreparedContext& ctx, bool use_relations) const {
  ComposedRepresentation out;
  out.knowledge_embedding = embed_ids(ctx.knowledge_ids, embedding_);
  const Tensor text = embed_ids(ctx.text_ids, embedding_);
  Tensor visual = Tensor::zeros(0, embedding_.dim());
  if (ctx.image_features.rows() > 0) {
    if (!has_images_) throw ShapeError("context carries image features but the model has no image projection");
    Tensor projected = image_.project(ctx.image_features);
    const Eigen::Index first = text.rows();
    const Eigen::Index n = std::min<Eigen::Index>(projected.rows(), embedding_.max_positions() - first);
    if (n < projected.rows()) {
      warn("context images truncated to " + std::to_string(n));
      projected = slice_rows(projected, 0, n);
    }
    visual = add(projected, slice_rows(embedding_.position, first, n));
  }
  out.n_knowledge = out.knowledge_embedding.rows();
  out.n_text = text.rows();
  out.n_visual = visual.rows();
  out.attribute_rep = compose_attributes(out.knowledge_embedding, text, visual);

  if (!use_relations || ctx.tuple_ids.empty()) {
    out.composed = out.attribute_rep;
    return out;
  }
  out.tuple_rep = encode_relation_tuples(ctx.tuple_ids);
  auto reorganized = reorganize_relations(out.attribute_rep, out.tuple_rep);
  out.reorganized = reorganized.output;
  out.relation_attention = reorganized.weights;
  auto fused = fuse(out.attribute_rep, out.reorganized, fusion_);
  out.r_t = fused.r_t;
  out.r_h = fused.r_h;
  out.composed = fused.composed;
  return out;
}

}  // namespace mds
