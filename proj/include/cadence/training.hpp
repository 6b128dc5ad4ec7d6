#pragma once

// Minibatch training with layered neighbor sampling, and full-coverage
// inference.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cadence/features.hpp"
#include "cadence/graph.hpp"
#include "cadence/model.hpp"
#include "cadence/random.hpp"
#include "cadence/score.hpp"

namespace cadence {

struct TrainConfig {
  int hidden_dim = 256;
  int layers = 2;
  /// fanouts[0] is the outermost hop, fanouts[layers - 1] the hop next to the seeds.
  std::vector<int> fanouts{10, 25};
  double lr = 0.007;
  double weight_decay = 0.007;
  int batch_size = 1024;
  int smote_k = 3;
  double gamma = 0.5;
  double tau = 0.5;
  int epochs = 50;
  std::uint64_t seed = 0;
  LabelScheme scheme;
  FeatureSet feature_set = FeatureSet::all;

  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
  nlohmann::json to_json() const;
  /// Keys present in `j` override `base`; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig()); }
  LossConfig loss() const { return {gamma, tau}; }
};

/// Samples, hop by hop outward from the seeds, up to the hop's fanout
/// neighbors per node without replacement (all of them when the degree fits
/// or the fanout is <= 0). Block l uses fanouts[l].
BatchBlocks sample_neighbors(const ScoreGraph& g, std::span<const std::uint32_t> seeds, std::span<const int> fanouts,
                             Random& rng);

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss_total = 0;
  double loss_ce = 0;
  double loss_bce = 0;
  std::optional<double> val_macro_f1;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

/// Adam (decoupled weight decay) over shuffled seed batches. With a validation
/// graph the parameters of the epoch with the best node-level macro-F1 are
/// returned, otherwise those of the last epoch. `init` continues from existing
/// weights (fine-tuning). Throws NumericError on a non-finite loss.
TrainResult train(const ScoreGraph& train_graph, const ScoreGraph* val_graph, const TrainConfig& cfg,
                  const ModelParams* init = nullptr, const TrainHooks& hooks = {});

struct PredictOptions {
  int batch_size = 1024;
  unsigned threads = 1;
};

/// Per-node class probabilities (n x C) using complete neighborhoods: every
/// node is embedded first, then classified with the mean over all its real
/// neighbors, so results do not depend on the batch size. Refuses
/// (DataError) when the graph's feature manifest differs from the model's.
Tensor2 predict(const ModelParams& params, const ScoreGraph& graph, const PredictOptions& opts = {});

/// Row-wise argmax, ties to the lower class.
std::vector<int> argmax_rows(const Tensor2& probs);

}  // namespace cadence
