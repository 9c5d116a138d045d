#include "mds/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "mds/error.hpp"

namespace mds {

using json = nlohmann::json;

DecodeOptions parse_strategy(const std::string& strategy, std::size_t max_len) {
  DecodeOptions opts;
  opts.max_len = max_len;
  if (strategy == "greedy") return opts;
  if (strategy.rfind("beam:", 0) == 0) {
    try {
      const long k = std::stol(strategy.substr(5));
      if (k >= 1) {
        opts.beam = static_cast<std::size_t>(k);
        return opts;
      }
    } catch (const std::exception&) {
    }
  }
  throw InputError("unknown decoding strategy '" + strategy + "' (expected greedy or beam:k)");
}

Model::Model(const ModelConfig& cfg, Vocabulary vocab, std::uint64_t seed) : cfg_(cfg), vocab_(std::move(vocab)) {
  Rng rng(seed);
  composer_ = Composer::make(params_, vocab_.size(), cfg_, rng);
  regularizer_ = SemanticRegularizer::make(params_, cfg_, rng);
  decoder_ = Decoder::make(params_, cfg_, rng);
  enhancer_ = SemanticEnhancer::make(params_, cfg_, rng);
  head_ = OutputHead::make(params_, vocab_.size(), cfg_, rng);
}

PreparedContext Model::prepare_context(const DialogContext& ctx, const ContextKnowledge& knowledge) const {
  PreparedContext out;
  out.knowledge_ids = vocab_.encode(linearize_attributes(knowledge.attributes));
  out.text_ids = vocab_.encode(ctx.text_tokens);
  if (!ctx.image_features.empty()) {
    const auto dim = ctx.image_features.front().size();
    out.image_features.resize(static_cast<Eigen::Index>(ctx.image_features.size()), dim);
    for (std::size_t i = 0; i < ctx.image_features.size(); ++i) {
      if (ctx.image_features[i].size() != dim) throw InputError("context image features differ in dimension");
      out.image_features.row(static_cast<Eigen::Index>(i)) = ctx.image_features[i].transpose();
    }
  }
  for (const auto& t : knowledge.tuples) out.tuple_ids.push_back(vocab_.encode(tuple_tokens(t)));
  return out;
}

PreparedPair Model::prepare(const DialogPair& pair, const KnowledgeBase& kb, const KnowledgeGraph& graph,
                            const AcquisitionConfig& acq) const {
  PreparedPair out;
  out.knowledge = acquire_knowledge(pair.context, kb, graph, acq);
  out.context = prepare_context(pair.context, out.knowledge);
  out.response_ids = vocab_.encode(pair.response);
  return out;
}

ComposedRepresentation Model::compose(const PreparedContext& ctx) const {
  return composer_.compose(ctx, cfg_.use_relations);
}

Tensor Model::truth_representation(std::span<const std::size_t> response_ids) const {
  return encode_ground_truth(response_ids, composer_.embedding(), composer_.encoder());
}

ForwardResult Model::forward(const PreparedPair& pair, const LossWeights& weights, EnhanceSource source) const {
  if (pair.response_ids.empty()) throw InputError("forward: empty response");
  ForwardResult out;
  out.composition = compose(pair.context);
  out.composed_semantics = regularizer_.project_composed(out.composition.composed);
  out.truth_semantics = regularizer_.project_truth(truth_representation(pair.response_ids));

  std::vector<std::size_t> inputs{Vocabulary::kBegin};
  inputs.insert(inputs.end(), pair.response_ids.begin(), pair.response_ids.end());
  out.targets.assign(pair.response_ids.begin(), pair.response_ids.end());
  out.targets.push_back(Vocabulary::kEnd);

  const Tensor states =
      decoder_.run(out.composition.composed, out.composition.knowledge_embedding, embed_ids(inputs, composer_.embedding()));
  const Tensor& semantics = source == EnhanceSource::truth ? out.truth_semantics : out.composed_semantics;
  out.probs = head_.predict(enhancer_.enhance(states, semantics));
  out.ce = cross_entropy_loss(out.probs, out.targets);
  out.reg = regularization_loss(out.truth_semantics, out.composed_semantics);
  out.loss = total_loss(out.ce, out.reg, params_, weights);
  return out;
}

namespace {

struct Beam {
  std::vector<std::size_t> ids;  // starts with begin
  double log_prob = 0.0;
  bool finished = false;
};

std::size_t argmax_lowest(const Matrix& row) {
  std::size_t best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j) {
    if (row(0, j) > row(0, static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(j);
  }
  return best;
}

}  // namespace

std::vector<std::size_t> Model::generate(const PreparedContext& ctx, const DecodeOptions& opts) const {
  if (opts.max_len == 0) throw InputError("generate: max_len must be positive");
  NoGradGuard no_grad;
  const ComposedRepresentation comp = compose(ctx);
  const Tensor semantics = regularizer_.project_composed(comp.composed);

  auto next_distribution = [&](const std::vector<std::size_t>& prefix) {
    const Tensor z = decode_step(decoder_, composer_.embedding(), comp.composed, comp.knowledge_embedding, prefix);
    return head_.predict(enhancer_.enhance(z, semantics)).value();
  };

  std::vector<Beam> beams{{{Vocabulary::kBegin}, 0.0, false}};
  for (std::size_t step = 0; step < opts.max_len; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; })) break;
    std::vector<Beam> candidates;
    for (const auto& beam : beams) {
      if (beam.finished) {
        candidates.push_back(beam);
        continue;
      }
      const Matrix dist = next_distribution(beam.ids);
      if (opts.beam == 1) {
        const std::size_t tok = argmax_lowest(dist);
        Beam b = beam;
        b.ids.push_back(tok);
        b.log_prob += std::log(std::max(dist(0, static_cast<Eigen::Index>(tok)), 1e-300));
        b.finished = tok == Vocabulary::kEnd;
        candidates.push_back(std::move(b));
        continue;
      }
      std::vector<std::size_t> order(static_cast<std::size_t>(dist.cols()));
      for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
      const std::size_t k = std::min(opts.beam, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          const double pa = dist(0, static_cast<Eigen::Index>(a));
                          const double pb = dist(0, static_cast<Eigen::Index>(b));
                          return pa != pb ? pa > pb : a < b;
                        });
      for (std::size_t j = 0; j < k; ++j) {
        Beam b = beam;
        b.ids.push_back(order[j]);
        b.log_prob += std::log(std::max(dist(0, static_cast<Eigen::Index>(order[j])), 1e-300));
        b.finished = order[j] == Vocabulary::kEnd;
        candidates.push_back(std::move(b));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& a, const Beam& b) { return a.log_prob > b.log_prob; });
    if (candidates.size() > opts.beam) candidates.resize(opts.beam);
    beams = std::move(candidates);
  }

  const Beam& best = beams.front();
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < best.ids.size(); ++i) {
    if (best.ids[i] == Vocabulary::kEnd) break;
    out.push_back(best.ids[i]);
  }
  return out;
}

std::string meta_path(const std::string& checkpoint_path) { return checkpoint_path + ".meta.json"; }

void Model::save(const std::string& path, const json& extra) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  params_.save(out);
  std::ofstream meta(meta_path(path));
  if (!meta) throw InputError("cannot write checkpoint metadata '" + meta_path(path) + "'");
  json cfg = {{"d_model", cfg_.d_model},
              {"encoder_layers", cfg_.encoder_layers},
              {"decoder_layers", cfg_.decoder_layers},
              {"latent_queries", cfg_.latent_queries},
              {"mlp_hidden", cfg_.mlp_hidden},
              {"max_positions", cfg_.max_positions},
              {"feature_dim", cfg_.feature_dim},
              {"scale_attention", cfg_.scale_attention},
              {"use_relations", cfg_.use_relations},
              {"init_range", cfg_.init_range}};
  json doc = {{"config", cfg}, {"vocab", vocab_.entries()}};
  if (!extra.is_null()) doc["training"] = extra;
  meta << doc.dump() << '\n';
}

json Model::load_training_meta(const std::string& path) {
  std::ifstream meta(meta_path(path));
  if (!meta) throw InputError("cannot open checkpoint metadata '" + meta_path(path) + "'");
  try {
    const json doc = json::parse(meta);
    return doc.contains("training") ? doc.at("training") : json(nullptr);
  } catch (const json::parse_error& err) {
    throw InputError(std::string("malformed checkpoint metadata: ") + err.what());
  }
}

Model Model::load(const std::string& path) {
  std::ifstream meta(meta_path(path));
  if (!meta) throw InputError("cannot open checkpoint metadata '" + meta_path(path) + "'");
  json doc;
  try {
    doc = json::parse(meta);
  } catch (const json::parse_error& err) {
    throw InputError(std::string("malformed checkpoint metadata: ") + err.what());
  }
  ModelConfig cfg;
  try {
    const auto& c = doc.at("config");
    cfg.d_model = c.at("d_model").get<Eigen::Index>();
    cfg.encoder_layers = c.at("encoder_layers").get<int>();
    cfg.decoder_layers = c.at("decoder_layers").get<int>();
    cfg.latent_queries = c.at("latent_queries").get<Eigen::Index>();
    cfg.mlp_hidden = c.at("mlp_hidden").get<Eigen::Index>();
    cfg.max_positions = c.at("max_positions").get<Eigen::Index>();
    cfg.feature_dim = c.at("feature_dim").get<Eigen::Index>();
    cfg.scale_attention = c.at("scale_attention").get<bool>();
    cfg.use_relations = c.at("use_relations").get<bool>();
    cfg.init_range = c.at("init_range").get<double>();
  } catch (const json::exception& err) {
    throw InputError(std::string("bad checkpoint metadata: ") + err.what());
  }
  Model model(cfg, Vocabulary(doc.at("vocab").get<std::vector<std::string>>()), 0);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  model.params_.load(in);
  return model;
}

}  // namespace mds
