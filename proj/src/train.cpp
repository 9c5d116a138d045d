#include "mds/train.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mds/error.hpp"
#include "mds/metrics.hpp"

namespace mds {

using json = nlohmann::json;

void apply_config(TrainingConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw InputError("config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "D" || key == "d_model") cfg.model.d_model = value.get<Eigen::Index>();
      else if (key == "L_enc") cfg.model.encoder_layers = value.get<int>();
      else if (key == "L_dec") cfg.model.decoder_layers = value.get<int>();
      else if (key == "N_P") cfg.model.latent_queries = value.get<Eigen::Index>();
      else if (key == "mlp_hidden") cfg.model.mlp_hidden = value.get<Eigen::Index>();
      else if (key == "max_positions") cfg.model.max_positions = value.get<Eigen::Index>();
      else if (key == "scale_attention") cfg.model.scale_attention = value.get<bool>();
      else if (key == "use_relations") cfg.model.use_relations = value.get<bool>();
      else if (key == "init_range") cfg.model.init_range = value.get<double>();
      else if (key == "epsilon") cfg.acquisition.epsilon = value.get<double>();
      else if (key == "max_hops") cfg.acquisition.max_hops = value.get<int>();
      else if (key == "max_tuples") cfg.acquisition.max_tuples = value.get<std::size_t>();
      else if (key == "lambda") cfg.loss.lambda = value.get<double>();
      else if (key == "gamma") cfg.loss.gamma = value.get<double>();
      else if (key == "beta") cfg.loss.beta = value.get<double>();
      else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
      else if (key == "max_grad_norm") cfg.max_grad_norm = value.get<double>();
      else if (key == "final_lr_fraction") cfg.final_lr_fraction = value.get<double>();
      else if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw InputError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& err) {
    throw InputError(std::string("bad config value: ") + err.what());
  }
  if (cfg.model.d_model < 2 || cfg.model.latent_queries < 1 || cfg.model.mlp_hidden < 1 ||
      cfg.model.encoder_layers < 0 || cfg.model.decoder_layers < 0 || cfg.acquisition.max_hops < 1 ||
      cfg.batch_size < 1 || cfg.epochs < 0 || cfg.learning_rate <= 0 || cfg.max_grad_norm < 0 ||
      cfg.final_lr_fraction < 0 || cfg.final_lr_fraction > 1) {
    throw InputError("config values out of range");
  }
  if (cfg.loss.lambda < 0 || cfg.loss.gamma < 0 || cfg.loss.beta < 0 ||
      (cfg.loss.lambda == 0 && cfg.loss.gamma == 0 && cfg.loss.beta == 0)) {
    throw InputError("loss weights must be non-negative and not all zero");
  }
}

json to_json(const TrainingConfig& cfg) {
  json j = {{"D", cfg.model.d_model},
            {"L_enc", cfg.model.encoder_layers},
            {"L_dec", cfg.model.decoder_layers},
            {"N_P", cfg.model.latent_queries},
            {"mlp_hidden", cfg.model.mlp_hidden},
            {"max_positions", cfg.model.max_positions},
            {"scale_attention", cfg.model.scale_attention},
            {"use_relations", cfg.model.use_relations},
            {"init_range", cfg.model.init_range},
            {"epsilon", cfg.acquisition.epsilon},
            {"max_hops", cfg.acquisition.max_hops},
            {"lambda", cfg.loss.lambda},
            {"gamma", cfg.loss.gamma},
            {"beta", cfg.loss.beta},
            {"learning_rate", cfg.learning_rate},
            {"max_grad_norm", cfg.max_grad_norm},
            {"final_lr_fraction", cfg.final_lr_fraction},
            {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed}};
  if (cfg.acquisition.max_tuples) j["max_tuples"] = *cfg.acquisition.max_tuples;
  return j;
}

Vocabulary build_vocabulary(const std::vector<DialogPair>& corpus, const KnowledgeBase& kb) {
  std::set<std::string> tokens{":", ";"};
  auto add_text = [&](const std::string& s) {
    for (auto& t : tokenize(s)) tokens.insert(std::move(t));
  };
  for (const auto& [name, e] : kb.entities()) {
    add_text(name);
    for (const auto& a : e.attributes) {
      add_text(a.type);
      add_text(a.value);
    }
  }
  for (const auto& p : corpus) {
    for (const auto& t : p.context.text_tokens) tokens.insert(t);
    for (const auto& t : p.response) tokens.insert(t);
  }
  Vocabulary vocab;
  for (const auto& t : tokens) vocab.add(t);
  return vocab;
}

Model make_model(const std::vector<DialogPair>& corpus, const KnowledgeBase& kb, const TrainingConfig& cfg) {
  ModelConfig mc = cfg.model;
  mc.feature_dim = static_cast<Eigen::Index>(kb.feature_dim());
  for (const auto& p : corpus) {
    for (const auto& f : p.context.image_features) {
      if (mc.feature_dim == 0) mc.feature_dim = f.size();
      if (f.size() != mc.feature_dim) throw InputError("context image feature dimension differs from the KB's");
    }
  }
  return Model(mc, build_vocabulary(corpus, kb), cfg.seed);
}

std::vector<PreparedPair> prepare_all(const Model& model, const std::vector<DialogPair>& corpus,
                                      const KnowledgeBase& kb, const AcquisitionConfig& acq) {
  const KnowledgeGraph graph = build_graph(kb);
  std::vector<PreparedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) out.push_back(model.prepare(p, kb, graph, acq));
  return out;
}

std::vector<EpochStats> train(Model& model, const std::vector<PreparedPair>& data, const TrainingConfig& cfg,
                              const EpochCallback& on_epoch) {
  if (data.empty()) throw InputError("training corpus is empty");
  Adam adam(model.params(), {.learning_rate = cfg.learning_rate, .max_grad_norm = cfg.max_grad_norm});
  Rng order_rng(cfg.seed ^ 0x5eed5eedULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochStats> history;
  model.params().zero_grad();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch - 1) / (cfg.epochs - 1) : 0.0;
    adam.set_learning_rate(cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * progress));
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& pair = data[order[k]];
        const ForwardResult r = model.forward(pair, cfg.loss, EnhanceSource::truth);
        const double loss = r.loss.item();
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", pair " << order[k] << " (ce " << r.ce.item()
              << ", reg " << r.reg.item() << ")";
          throw std::runtime_error(msg.str());
        }
        stats.mean_loss += loss;
        stats.mean_ce += r.ce.item();
        stats.mean_reg += r.reg.item();
        backward(inv == 1.0 ? r.loss : scale(r.loss, inv));
      }
      adam.step(model.params());
    }
    const double n = static_cast<double>(data.size());
    stats.mean_loss /= n;
    stats.mean_ce /= n;
    stats.mean_reg /= n;
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

Model train(const std::vector<DialogPair>& corpus, const KnowledgeBase& kb, const TrainingConfig& cfg,
            std::vector<EpochStats>* history, const EpochCallback& on_epoch) {
  Model model = make_model(corpus, kb, cfg);
  const auto data = prepare_all(model, corpus, kb, cfg.acquisition);
  auto h = train(model, data, cfg, on_epoch);
  if (history) *history = std::move(h);
  return model;
}

json EvaluationReport::to_json() const {
  return {{"bleu1", bleu[0]}, {"bleu2", bleu[1]}, {"bleu3", bleu[2]},
          {"bleu4", bleu[3]}, {"nist", nist},     {"exact_match", exact_match}};
}

EvaluationReport evaluate(const Model& model, const std::vector<DialogPair>& corpus, const KnowledgeBase& kb,
                          const AcquisitionConfig& acq, const DecodeOptions& decode) {
  if (corpus.empty()) throw InputError("evaluation corpus is empty");
  const KnowledgeGraph graph = build_graph(kb);
  EvaluationReport report;
  std::vector<Sentence> references;
  std::size_t exact = 0;
  for (const auto& pair : corpus) {
    const ContextKnowledge knowledge = acquire_knowledge(pair.context, kb, graph, acq);
    const auto ids = model.generate(model.prepare_context(pair.context, knowledge), decode);
    Sentence hyp = model.vocab().decode(ids);
    if (hyp == pair.response) ++exact;
    report.hypotheses.push_back(std::move(hyp));
    references.push_back(pair.response);
  }
  for (int n = 1; n <= 4; ++n) report.bleu[n - 1] = bleu(report.hypotheses, references, n);
  report.nist = nist(report.hypotheses, references);
  report.exact_match = static_cast<double>(exact) / static_cast<double>(corpus.size());
  return report;
}

double token_accuracy(const Model& model, const std::vector<PreparedPair>& data) {
  NoGradGuard no_grad;
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& pair : data) {
    const ForwardResult r = model.forward(pair, {}, EnhanceSource::composed);
    const Matrix& probs = r.probs.value();
    for (std::size_t i = 0; i + 1 < r.targets.size(); ++i) {
      Eigen::Index best = 0;
      probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      correct += static_cast<std::size_t>(best) == r.targets[i];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double mean_semantic_distance(const Model& model, const std::vector<PreparedPair>& data) {
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& pair : data) {
    const Tensor composed = model.regularizer().project_composed(model.compose(pair.context).composed);
    const Tensor truth = model.regularizer().project_truth(model.truth_representation(pair.response_ids));
    total += regularization_loss(truth, composed).item();
  }
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

}  // namespace mds
