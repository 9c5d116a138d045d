#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mds/metrics.hpp"
#include "mds/model.hpp"

namespace mds {

struct TrainingConfig {
  ModelConfig model;
  AcquisitionConfig acquisition{.epsilon = 0.8, .max_hops = 2, .max_tuples = 64};
  LossWeights loss;
  double learning_rate = 1e-3;
  double max_grad_norm = 1.0;
  /// Learning rate decays linearly from learning_rate (first epoch) to
  /// learning_rate * final_lr_fraction (last epoch).
  double final_lr_fraction = 0.05;
  int epochs = 200;
  std::size_t batch_size = 1;
  std::uint64_t seed = 7;
};

/// Reads the fields present in `doc` (names as in the struct, flattened:
/// d_model, L_enc, L_dec, N_P, epsilon, max_hops, lambda, gamma, beta,
/// learning_rate, epochs, batch_size, seed, ...). Unknown keys are rejected.
void apply_config(TrainingConfig& cfg, const nlohmann::json& doc);
nlohmann::json to_json(const TrainingConfig& cfg);

/// Every token of the KB (names, types, values), the attribute separators
/// and the corpus, in sorted order after the reserved entries.
Vocabulary build_vocabulary(const std::vector<DialogPair>& corpus, const KnowledgeBase& kb);

Model make_model(const std::vector<DialogPair>& corpus, const KnowledgeBase& kb, const TrainingConfig& cfg);

std::vector<PreparedPair> prepare_all(const Model& model, const std::vector<DialogPair>& corpus,
                                      const KnowledgeBase& kb, const AcquisitionConfig& acq);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_ce = 0.0;
  double mean_reg = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam over shuffled mini-batches (per-epoch permutation from cfg.seed).
/// Throws std::runtime_error on a non-finite loss.
std::vector<EpochStats> train(Model& model, const std::vector<PreparedPair>& data, const TrainingConfig& cfg,
                              const EpochCallback& on_epoch = {});

/// Builds the vocabulary and model from the corpus, then trains.
Model train(const std::vector<DialogPair>& corpus, const KnowledgeBase& kb, const TrainingConfig& cfg,
            std::vector<EpochStats>* history = nullptr, const EpochCallback& on_epoch = {});

struct EvaluationReport {
  double bleu[4] = {0, 0, 0, 0};
  double nist = 0.0;
  double exact_match = 0.0;
  std::vector<Sentence> hypotheses;

  nlohmann::json to_json() const;
};

EvaluationReport evaluate(const Model& model, const std::vector<DialogPair>& corpus, const KnowledgeBase& kb,
                          const AcquisitionConfig& acq, const DecodeOptions& decode = {});

/// Teacher-forced next-token accuracy with the inference-time (composed)
/// enhancement, pooled over all response tokens (end marker excluded).
double token_accuracy(const Model& model, const std::vector<PreparedPair>& data);

/// Mean squared Frobenius distance between composed and ground-truth
/// semantic representations.
double mean_semantic_distance(const Model& model, const std::vector<PreparedPair>& data);

}  // namespace mds
