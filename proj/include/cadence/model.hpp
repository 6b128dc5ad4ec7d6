#pragma once

// Stochastic GraphSMOTE: a GraphSAGE encoder over sampled neighborhoods, SMOTE
// in the encoder's latent space, a bilinear edge decoder with hard shrinkage,
// and a GraphSAGE classifier running on the decoded adjacency. Gradients are
// derived by hand for exactly these operations.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cadence/random.hpp"

namespace cadence {

using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kNormEps = 1e-12;
inline constexpr double kLogEps = 1e-12;

struct ModelConfig {
  int input_dim = 0;
  int hidden_dim = 256;
  /// Encoder depth. 0 disables graph convolution entirely: the encoder is the
  /// identity and inference uses no adjacency.
  int layers = 2;
  int num_classes = 2;
  std::string manifest_hash;  // feature manifest the model was trained on

  int latent_dim() const noexcept { return layers == 0 ? input_dim : hidden_dim; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct SageWeights {
  Tensor2 pool;  // d_out x d_in
  Tensor2 enc;   // d_out x (d_in + d_out)
};

/// All learnable matrices. Visiting order (also the checkpoint order):
/// encoder[0].pool, encoder[0].enc, ..., dec, clf_pool, clf, proj.
struct ModelParams {
  ModelConfig config;
  std::vector<SageWeights> encoder;
  Tensor2 dec;       // d x d
  Tensor2 clf_pool;  // d x d
  Tensor2 clf;       // d x 2d
  Tensor2 proj;      // C x d

  static ModelParams zeros(const ModelConfig& config);
  /// Glorot-uniform init, deterministic in `seed`.
  static ModelParams glorot(const ModelConfig& config, std::uint64_t seed);

  template <typename F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < encoder.size(); ++l) {
      f("encoder." + std::to_string(l) + ".pool", encoder[l].pool);
      f("encoder." + std::to_string(l) + ".enc", encoder[l].enc);
    }
    f(std::string("dec"), dec);
    f(std::string("clf_pool"), clf_pool);
    f(std::string("clf"), clf);
    f(std::string("proj"), proj);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each([&f](const std::string& name, Tensor2& m) { f(name, static_cast<const Tensor2&>(m)); });
  }

  std::size_t parameter_count() const;
};

/// One message-passing step. Destination nodes are the first `num_dst` source
/// rows; neighbor lists index into the source rows.
struct Block {
  std::uint32_t num_dst = 0;
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> neighbors;
};

/// A sampled minibatch. layer_nodes[0] are the deepest (input) nodes,
/// layer_nodes[L] the seeds; blocks[l] maps layer l to layer l + 1.
struct BatchBlocks {
  std::vector<std::uint32_t> seeds;
  std::vector<std::vector<std::uint32_t>> layer_nodes;
  std::vector<Block> blocks;
  Tensor2 input;               // rows = layer_nodes[0]
  std::vector<int> labels;     // per seed
  Tensor2 seed_adjacency;      // |B| x |B| real adjacency among seeds (0/1)
};

// --- encoder ---------------------------------------------------------------

struct SageCache {
  Tensor2 agg;   // mean of neighbor rows (d_in)
  Tensor2 cat;   // [self, W_pool agg]
  Tensor2 z;     // pre-activation
  std::vector<std::uint8_t> gate;  // ReLU mask actually applied
  Eigen::VectorXd norms;
  Tensor2 out;
};

/// Relu masks and the hard-shrinkage keep mask of one training pass. Passing a
/// frozen pattern makes the forward pass evaluate the smooth piece selected by
/// it (used by finite-difference checks across activation kinks).
struct ActivationPattern {
  std::vector<std::vector<std::uint8_t>> encoder_relu;
  std::vector<std::uint8_t> classifier_relu;
  std::vector<std::uint8_t> keep;
  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

/// h_N(i) = mean_j W_pool h_j; h_i' = norm(ReLU(W_enc [h_i, h_N(i)])).
Tensor2 sage_layer_forward(const Tensor2& h_src, const Block& block, const SageWeights& w, SageCache* cache = nullptr,
                           const std::vector<std::uint8_t>* frozen_relu = nullptr);

/// Encoder output for the seeds (input features when layers == 0).
Tensor2 encode(const BatchBlocks& batch, const ModelParams& params, std::vector<SageCache>* caches = nullptr,
               std::vector<Tensor2>* layer_inputs = nullptr, const ActivationPattern* frozen = nullptr);

// --- SMOTE -----------------------------------------------------------------

struct SyntheticRow {
  std::uint32_t anchor = 0;
  std::uint32_t neighbor = 0;
  double lambda = 0.0;
  int label = 0;
};

struct SmotePlan {
  std::vector<SyntheticRow> rows;
};

struct SmoteOutput {
  Tensor2 h_smote;
  std::vector<int> labels_aug;
  std::vector<SyntheticRow> provenance;
};

/// The k nearest same-class rows of `anchor` among `members` (Euclidean, ties by
/// index), excluding the anchor itself.
std::vector<std::uint32_t> nearest_same_class(const Tensor2& h, std::span<const std::uint32_t> members,
                                              std::uint32_t anchor, int k);

/// Chooses synthetic rows: every class with at least two members is topped up
/// to the majority count by interpolating a uniformly drawn anchor towards one
/// of its k nearest same-class neighbors with lambda ~ U[0, 1).
template <typename Rng>
SmotePlan plan_smote(const Tensor2& h, std::span<const int> labels, int k, Rng& rng) {
  SmotePlan plan;
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<std::vector<std::uint32_t>> members(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<std::uint32_t>(i));
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto& m = members[c];
    if (m.size() < 2 || m.size() >= majority) continue;
    const int kk = std::min<int>(k, static_cast<int>(m.size()) - 1);
    std::vector<std::vector<std::uint32_t>> knn(m.size());
    for (std::size_t r = 0; r < majority - m.size(); ++r) {
      std::size_t a = rng.index(m.size());
      if (knn[a].empty()) knn[a] = nearest_same_class(h, m, m[a], kk);
      std::uint32_t nb = knn[a][rng.index(knn[a].size())];
      double lambda = rng.unit();
      plan.rows.push_back({m[a], nb, lambda, static_cast<int>(c)});
    }
  }
  return plan;
}

Tensor2 apply_smote(const Tensor2& h, const SmotePlan& plan);

template <typename Rng>
SmoteOutput smote_upsample(const Tensor2& h, std::span<const int> labels, int k, Rng& rng) {
  SmotePlan plan = plan_smote(h, labels, k, rng);
  SmoteOutput out;
  out.h_smote = apply_smote(h, plan);
  out.labels_aug.assign(labels.begin(), labels.end());
  for (const auto& r : plan.rows) out.labels_aug.push_back(r.label);
  out.provenance = std::move(plan.rows);
  return out;
}

// --- decoder, classifier, loss ----------------------------------------------

/// sigmoid(H W H^T)
Tensor2 decode_adjacency(const Tensor2& h, const Tensor2& w_dec);
/// 1 - decode_adjacency(h, w_dec), evaluated as sigmoid(-x) so it keeps
/// precision where the decoder saturates towards 1.
Tensor2 decode_adjacency_complement(const Tensor2& h, const Tensor2& w_dec);

/// Keeps x when |x| > tau, else 0.
Tensor2 hardshrink(const Tensor2& a, double tau);

struct ClassifierCache {
  Eigen::VectorXd row_sums;
  Tensor2 agg;
  Tensor2 cat;
  Tensor2 z;
  std::vector<std::uint8_t> gate;
  Eigen::VectorXd norms;
  Tensor2 hidden;
  Tensor2 probs;
};

/// Row-wise class probabilities. The neighbor term is the A-weighted mean of
/// H's rows (zero for an all-zero row), then W_pool; then
/// norm(ReLU(W_clf [h_i, h_N(i)])) and softmax(W_proj .).
Tensor2 classify(const Tensor2& h, const Tensor2& a_used, const ModelParams& params, ClassifierCache* cache = nullptr,
                 const std::vector<std::uint8_t>* frozen_relu = nullptr);

struct LossParts {
  double total = 0;
  double ce = 0;
  double bce = 0;
};

/// CE over all augmented rows plus gamma times the positively reweighted BCE
/// between the decoder output and the real adjacency over ordered pairs
/// (i != j) of original seed rows.
/// `a_dec_complement`, when given, supplies 1 - a_dec.
LossParts loss_total(const Tensor2& probs, std::span<const int> labels_aug, const Tensor2& a_dec, const Tensor2& a_batch,
                     double gamma, const Tensor2* a_dec_complement = nullptr);

struct LossConfig {
  double gamma = 0.5;
  double tau = 0.5;
};

/// Everything recorded by a training-mode forward pass.
struct ForwardState {
  std::vector<Tensor2> layer_inputs;
  std::vector<SageCache> encoder;
  Tensor2 h_enc;
  Tensor2 h_smote;
  std::vector<int> labels_aug;
  Tensor2 a_dec;
  Tensor2 a_dec_c;  // 1 - a_dec
  Tensor2 a_thr;
  ClassifierCache classifier;
  ActivationPattern pattern;  // observed at this point
  ActivationPattern applied;  // used for the forward values (== pattern unless frozen)
  LossParts loss;
};

/// encode -> SMOTE (given plan) -> decode -> hardshrink -> classify -> loss.
ForwardState forward_train(const ModelParams& params, const BatchBlocks& batch, const SmotePlan& plan,
                           const LossConfig& cfg, const ActivationPattern* frozen = nullptr);

/// First stage of forward_train: fills layer_inputs, encoder caches and h_enc.
void forward_encode(const ModelParams& params, const BatchBlocks& batch, ForwardState& state,
                    const ActivationPattern* frozen = nullptr);
/// Second stage: everything after the encoder, for a plan chosen from h_enc.
void forward_head(const ModelParams& params, const BatchBlocks& batch, const SmotePlan& plan, const LossConfig& cfg,
                  ForwardState& state, const ActivationPattern* frozen = nullptr);

/// Exact reverse-mode gradient of the total loss recorded in `state`.
/// Throws NumericError on non-finite gradients.
ModelParams backward_train(const ModelParams& params, const BatchBlocks& batch, const SmotePlan& plan,
                           const ForwardState& state, const LossConfig& cfg);

/// Inference: no SMOTE, no decoder; the classifier sees the real adjacency
/// among the seeds (none when layers == 0).
Tensor2 predict_batch(const ModelParams& params, const BatchBlocks& batch);

}  // namespace cadence
