#include "cadence/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cadence/error.hpp"

namespace cadence {

namespace {

void require_finite(const Tensor2& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

Tensor2 row_normalize(const Tensor2& a, Eigen::VectorXd& norms) {
  norms = a.rowwise().norm();
  Tensor2 out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.row(r) = a.row(r) / std::max(norms(r), kNormEps);
  return out;
}

Tensor2 row_normalize_backward(const Tensor2& grad, const Tensor2& out, const Eigen::VectorXd& norms) {
  Tensor2 d(grad.rows(), grad.cols());
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    if (norms(r) > kNormEps)
      d.row(r) = (grad.row(r) - out.row(r) * out.row(r).dot(grad.row(r))) / norms(r);
    else
      d.row(r) = grad.row(r) / kNormEps;
  }
  return d;
}

/// Applies ReLU (or a frozen gate) and records the gate used.
Tensor2 gated_relu(const Tensor2& z, const std::vector<std::uint8_t>* frozen, std::vector<std::uint8_t>& gate) {
  const auto n = static_cast<std::size_t>(z.size());
  if (frozen) {
    if (frozen->size() != n) throw std::invalid_argument("frozen ReLU pattern has the wrong size");
    gate = *frozen;
  } else {
    gate.resize(n);
    for (std::size_t i = 0; i < n; ++i) gate[i] = z.data()[i] > 0.0 ? 1 : 0;
  }
  Tensor2 a(z.rows(), z.cols());
  for (std::size_t i = 0; i < n; ++i) a.data()[i] = gate[i] ? z.data()[i] : 0.0;
  return a;
}

std::vector<std::uint8_t> positive_mask(const Tensor2& z) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(z.size()));
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = z.data()[i] > 0.0 ? 1 : 0;
  return m;
}

void apply_gate(Tensor2& d, const std::vector<std::uint8_t>& gate) {
  for (std::size_t i = 0; i < gate.size(); ++i)
    if (!gate[i]) d.data()[i] = 0.0;
}

Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    double s = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) s += p(r, c) = std::exp(logits(r, c) - mx);
    p.row(r) /= s;
  }
  return p;
}

double cross_entropy(const Tensor2& probs, std::span<const int> labels, Tensor2* dprobs) {
  const auto m = probs.rows();
  if (static_cast<std::size_t>(m) != labels.size()) throw std::invalid_argument("label count != prob rows");
  if (m == 0) return 0.0;
  if (dprobs) *dprobs = Tensor2::Zero(probs.rows(), probs.cols());
  double s = 0;
  for (Eigen::Index r = 0; r < m; ++r) {
    double p = probs(r, labels[static_cast<std::size_t>(r)]);
    s -= std::log(std::max(p, kLogEps));
    if (dprobs && p > kLogEps) (*dprobs)(r, labels[static_cast<std::size_t>(r)]) = -1.0 / (p * static_cast<double>(m));
  }
  return s / static_cast<double>(m);
}

/// Positive-weighted mean BCE over ordered pairs i != j of the first |B| rows.
double weighted_bce(const Tensor2& a_dec, const Tensor2* a_dec_c, const Tensor2& a_batch, Tensor2* grad, double scale) {
  const Eigen::Index b = a_batch.rows();
  if (a_batch.cols() != b || a_dec.rows() < b || a_dec.cols() < b)
    throw std::invalid_argument("batch adjacency does not fit the decoder output");
  if (b < 2) return 0.0;
  double ones = 0, zeros = 0;
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j)
      if (i != j) (a_batch(i, j) > 0.5 ? ones : zeros) += 1;
  const double w_pos = ones > 0 && zeros > 0 ? zeros / ones : 1.0;
  const double w_sum = w_pos * ones + zeros;
  double s = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      if (i == j) continue;
      const double t = a_batch(i, j);
      const double p = a_dec(i, j);
      const double q = a_dec_c ? (*a_dec_c)(i, j) : 1 - p;
      const double w = t > 0.5 ? w_pos : 1.0;
      s -= w * (t * std::log(std::max(p, kLogEps)) + (1 - t) * std::log(std::max(q, kLogEps)));
      if (grad) {
        double g = 0;
        if (p > kLogEps) g -= t / p;
        if (q > kLogEps) g += (1 - t) / q;
        (*grad)(i, j) += scale * w * g / w_sum;
      }
    }
  }
  return s / w_sum;
}

Tensor2 glorot(Eigen::Index rows, Eigen::Index cols, Random& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor2 m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

ModelParams ModelParams::zeros(const ModelConfig& config) {
  if (config.input_dim <= 0 || config.hidden_dim <= 0 || config.layers < 0 || config.num_classes < 2)
    throw std::invalid_argument("invalid model configuration");
  ModelParams p;
  p.config = config;
  int d_in = config.input_dim;
  for (int l = 0; l < config.layers; ++l) {
    const int d_out = config.hidden_dim;
    p.encoder.push_back({Tensor2::Zero(d_out, d_in), Tensor2::Zero(d_out, d_in + d_out)});
    d_in = d_out;
  }
  const int d = config.latent_dim();
  p.dec = Tensor2::Zero(d, d);
  p.clf_pool = Tensor2::Zero(d, d);
  p.clf = Tensor2::Zero(d, 2 * d);
  p.proj = Tensor2::Zero(config.num_classes, d);
  return p;
}

ModelParams ModelParams::glorot(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  Random rng(seed);
  p.for_each([&rng](const std::string&, Tensor2& m) { m = cadence::glorot(m.rows(), m.cols(), rng); });
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Tensor2& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

// --- encoder ---------------------------------------------------------------

Tensor2 sage_layer_forward(const Tensor2& h_src, const Block& block, const SageWeights& w, SageCache* cache,
                           const std::vector<std::uint8_t>* frozen_relu) {
  const Eigen::Index nd = block.num_dst;
  const Eigen::Index d_in = h_src.cols();
  if (w.pool.cols() != d_in || w.enc.cols() != d_in + w.pool.rows() || nd > h_src.rows() ||
      block.offsets.size() != static_cast<std::size_t>(nd) + 1)
    throw std::invalid_argument("sage layer: shape mismatch");

  Tensor2 agg = Tensor2::Zero(nd, d_in);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const auto b = block.offsets[static_cast<std::size_t>(i)], e = block.offsets[static_cast<std::size_t>(i) + 1];
    if (b == e) continue;
    for (auto k = b; k < e; ++k) agg.row(i) += h_src.row(block.neighbors[k]);
    agg.row(i) /= static_cast<double>(e - b);
  }
  Tensor2 cat(nd, d_in + w.pool.rows());
  cat.leftCols(d_in) = h_src.topRows(nd);
  cat.rightCols(w.pool.rows()) = agg * w.pool.transpose();
  Tensor2 z = cat * w.enc.transpose();
  std::vector<std::uint8_t> gate;
  Tensor2 act = gated_relu(z, frozen_relu, gate);
  Eigen::VectorXd norms;
  Tensor2 out = row_normalize(act, norms);
  require_finite(out, "encoder layer output");
  if (cache) {
    cache->agg = std::move(agg);
    cache->cat = std::move(cat);
    cache->z = std::move(z);
    cache->gate = std::move(gate);
    cache->norms = std::move(norms);
    cache->out = out;
  }
  return out;
}

Tensor2 encode(const BatchBlocks& batch, const ModelParams& params, std::vector<SageCache>* caches,
               std::vector<Tensor2>* layer_inputs, const ActivationPattern* frozen) {
  const std::size_t layers = params.encoder.size();
  if (batch.blocks.size() != layers) throw std::invalid_argument("batch depth does not match encoder depth");
  if (caches) caches->assign(layers, {});
  Tensor2 h = batch.input;
  if (layer_inputs) {
    layer_inputs->clear();
    layer_inputs->push_back(h);
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const std::vector<std::uint8_t>* fr = frozen ? &frozen->encoder_relu.at(l) : nullptr;
    h = sage_layer_forward(h, batch.blocks[l], params.encoder[l], caches ? &(*caches)[l] : nullptr, fr);
    if (layer_inputs) layer_inputs->push_back(h);
  }
  return h;
}

// --- SMOTE -----------------------------------------------------------------

std::vector<std::uint32_t> nearest_same_class(const Tensor2& h, std::span<const std::uint32_t> members,
                                              std::uint32_t anchor, int k) {
  std::vector<std::pair<double, std::uint32_t>> dist;
  for (auto m : members) {
    if (m == anchor) continue;
    dist.push_back({(h.row(m) - h.row(anchor)).squaredNorm(), m});
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < kk; ++i) out.push_back(dist[i].second);
  return out;
}

Tensor2 apply_smote(const Tensor2& h, const SmotePlan& plan) {
  Tensor2 out(h.rows() + static_cast<Eigen::Index>(plan.rows.size()), h.cols());
  out.topRows(h.rows()) = h;
  for (std::size_t r = 0; r < plan.rows.size(); ++r) {
    const auto& s = plan.rows[r];
    out.row(h.rows() + static_cast<Eigen::Index>(r)) = h.row(s.anchor) + s.lambda * (h.row(s.neighbor) - h.row(s.anchor));
  }
  return out;
}

// --- decoder, classifier, loss ----------------------------------------------

Tensor2 decode_adjacency(const Tensor2& h, const Tensor2& w_dec) {
  Tensor2 x = h * w_dec * h.transpose();
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor2 decode_adjacency_complement(const Tensor2& h, const Tensor2& w_dec) {
  Tensor2 x = h * w_dec * h.transpose();
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(v)); });
}

Tensor2 hardshrink(const Tensor2& a, double tau) {
  if (tau < 0) throw std::invalid_argument("hardshrink threshold must be >= 0");
  return a.unaryExpr([tau](double v) { return (v > tau || v < -tau) ? v : 0.0; });
}

Tensor2 classify(const Tensor2& h, const Tensor2& a_used, const ModelParams& params, ClassifierCache* cache,
                 const std::vector<std::uint8_t>* frozen_relu) {
  const Eigen::Index m = h.rows();
  const Eigen::Index d = h.cols();
  if (a_used.rows() != m || a_used.cols() != m) throw std::invalid_argument("classifier adjacency must be square over H");
  if (params.clf_pool.cols() != d) throw std::invalid_argument("classifier: latent width mismatch");
  require_finite(h, "classifier input");

  Eigen::VectorXd row_sums = a_used.rowwise().sum();
  Tensor2 agg = a_used * h;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (row_sums(i) != 0.0)
      agg.row(i) /= row_sums(i);
    else
      agg.row(i).setZero();
  }
  Tensor2 cat(m, 2 * d);
  cat.leftCols(d) = h;
  cat.rightCols(d) = agg * params.clf_pool.transpose();
  Tensor2 z = cat * params.clf.transpose();
  std::vector<std::uint8_t> gate;
  Tensor2 act = gated_relu(z, frozen_relu, gate);
  Eigen::VectorXd norms;
  Tensor2 hidden = row_normalize(act, norms);
  Tensor2 probs = softmax_rows(hidden * params.proj.transpose());
  require_finite(probs, "classifier output");
  if (cache) {
    cache->row_sums = std::move(row_sums);
    cache->agg = std::move(agg);
    cache->cat = std::move(cat);
    cache->z = std::move(z);
    cache->gate = std::move(gate);
    cache->norms = std::move(norms);
    cache->hidden = std::move(hidden);
    cache->probs = probs;
  }
  return probs;
}

LossParts loss_total(const Tensor2& probs, std::span<const int> labels_aug, const Tensor2& a_dec, const Tensor2& a_batch,
                     double gamma, const Tensor2* a_dec_complement) {
  if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
  LossParts l;
  l.ce = cross_entropy(probs, labels_aug, nullptr);
  l.bce = weighted_bce(a_dec, a_dec_complement, a_batch, nullptr, 0.0);
  l.total = l.ce + gamma * l.bce;
  return l;
}

void forward_encode(const ModelParams& params, const BatchBlocks& batch, ForwardState& s,
                    const ActivationPattern* frozen) {
  s.h_enc = encode(batch, params, &s.encoder, &s.layer_inputs, frozen);
  if (static_cast<std::size_t>(s.h_enc.rows()) != batch.labels.size())
    throw std::invalid_argument("encoder rows do not match the seed labels");
}

ForwardState forward_train(const ModelParams& params, const BatchBlocks& batch, const SmotePlan& plan,
                           const LossConfig& cfg, const ActivationPattern* frozen) {
  ForwardState s;
  forward_encode(params, batch, s, frozen);
  forward_head(params, batch, plan, cfg, s, frozen);
  return s;
}

void forward_head(const ModelParams& params, const BatchBlocks& batch, const SmotePlan& plan, const LossConfig& cfg,
                  ForwardState& s, const ActivationPattern* frozen) {
  s.h_smote = apply_smote(s.h_enc, plan);
  s.labels_aug = batch.labels;
  s.pattern = {};
  s.applied = {};
  for (const auto& r : plan.rows) s.labels_aug.push_back(r.label);

  s.a_dec = decode_adjacency(s.h_smote, params.dec);
  s.a_dec_c = decode_adjacency_complement(s.h_smote, params.dec);
  s.pattern.keep.resize(static_cast<std::size_t>(s.a_dec.size()));
  for (std::size_t i = 0; i < s.pattern.keep.size(); ++i) {
    double v = s.a_dec.data()[i];
    s.pattern.keep[i] = (v > cfg.tau || v < -cfg.tau) ? 1 : 0;
  }
  s.applied.keep = frozen ? frozen->keep : s.pattern.keep;
  if (s.applied.keep.size() != s.pattern.keep.size()) throw std::invalid_argument("frozen keep mask has the wrong size");
  s.a_thr = s.a_dec;
  for (std::size_t i = 0; i < s.applied.keep.size(); ++i)
    if (!s.applied.keep[i]) s.a_thr.data()[i] = 0.0;

  classify(s.h_smote, s.a_thr, params, &s.classifier, frozen ? &frozen->classifier_relu : nullptr);
  s.loss = loss_total(s.classifier.probs, s.labels_aug, s.a_dec, batch.seed_adjacency, cfg.gamma, &s.a_dec_c);

  for (const auto& c : s.encoder) {
    s.pattern.encoder_relu.push_back(positive_mask(c.z));
    s.applied.encoder_relu.push_back(c.gate);
  }
  s.pattern.classifier_relu = positive_mask(s.classifier.z);
  s.applied.classifier_relu = s.classifier.gate;
  if (!std::isfinite(s.loss.total)) throw NumericError("non-finite training loss");
}

ModelParams backward_train(const ModelParams& params, const BatchBlocks& batch, const SmotePlan& plan,
                           const ForwardState& s, const LossConfig& cfg) {
  ModelParams g = ModelParams::zeros(params.config);
  const auto& cc = s.classifier;
  const Eigen::Index m = s.h_smote.rows();
  const Eigen::Index d = s.h_smote.cols();

  // softmax + CE
  Tensor2 dprobs;
  cross_entropy(cc.probs, s.labels_aug, &dprobs);
  Tensor2 dlogits(m, cc.probs.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    double gp = dprobs.row(r).dot(cc.probs.row(r));
    dlogits.row(r) = cc.probs.row(r).cwiseProduct(dprobs.row(r) - Eigen::RowVectorXd::Constant(cc.probs.cols(), gp));
  }

  // classifier
  g.proj = dlogits.transpose() * cc.hidden;
  Tensor2 dhidden = dlogits * params.proj;
  Tensor2 dz = row_normalize_backward(dhidden, cc.hidden, cc.norms);
  apply_gate(dz, cc.gate);
  g.clf = dz.transpose() * cc.cat;
  Tensor2 dcat = dz * params.clf;
  Tensor2 dh = dcat.leftCols(d);
  Tensor2 dhn = dcat.rightCols(d);
  g.clf_pool = dhn.transpose() * cc.agg;
  Tensor2 dagg = dhn * params.clf_pool;

  Tensor2 da_dec = Tensor2::Zero(m, m);
  {
    // agg_i = sum_j A_ij h_j / r_i
    Tensor2 scaled = dagg;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (cc.row_sums(i) != 0.0)
        scaled.row(i) /= cc.row_sums(i);
      else
        scaled.row(i).setZero();
    }
    dh.noalias() += s.a_thr.transpose() * scaled;
    Tensor2 da_thr = scaled * s.h_smote.transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (cc.row_sums(i) == 0.0) continue;
      da_thr.row(i).array() -= scaled.row(i).dot(cc.agg.row(i));
    }
    for (std::size_t i = 0; i < s.applied.keep.size(); ++i)
      if (s.applied.keep[i]) da_dec.data()[i] = da_thr.data()[i];
  }

  // BCE on the original block
  weighted_bce(s.a_dec, &s.a_dec_c, batch.seed_adjacency, &da_dec, cfg.gamma);

  // decoder: A = sigmoid(H W H^T)
  Tensor2 dx = da_dec.cwiseProduct(s.a_dec.cwiseProduct(s.a_dec_c));
  Tensor2 hw = s.h_smote * params.dec;
  g.dec = s.h_smote.transpose() * dx * s.h_smote;
  dh.noalias() += dx * s.h_smote * params.dec.transpose();
  dh.noalias() += dx.transpose() * hw;

  // SMOTE rows flow back to their anchor and neighbor
  const Eigen::Index b = s.h_enc.rows();
  Tensor2 dh_enc = dh.topRows(b);
  for (std::size_t r = 0; r < plan.rows.size(); ++r) {
    const auto& sr = plan.rows[r];
    auto row = dh.row(b + static_cast<Eigen::Index>(r));
    dh_enc.row(sr.anchor) += (1.0 - sr.lambda) * row;
    dh_enc.row(sr.neighbor) += sr.lambda * row;
  }

  // encoder layers, last to first
  Tensor2 dout = std::move(dh_enc);
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    const auto& c = s.encoder[l];
    const auto& w = params.encoder[l];
    const auto& block = batch.blocks[l];
    const Tensor2& h_src = s.layer_inputs[l];
    const Eigen::Index d_in = h_src.cols();
    const Eigen::Index d_out = w.pool.rows();

    Tensor2 dzl = row_normalize_backward(dout, c.out, c.norms);
    apply_gate(dzl, c.gate);
    g.encoder[l].enc = dzl.transpose() * c.cat;
    Tensor2 dcatl = dzl * w.enc;
    Tensor2 dhnl = dcatl.rightCols(d_out);
    g.encoder[l].pool = dhnl.transpose() * c.agg;
    if (l == 0) break;  // no gradient needed for the input features

    Tensor2 daggl = dhnl * w.pool;
    Tensor2 dsrc = Tensor2::Zero(h_src.rows(), d_in);
    dsrc.topRows(block.num_dst) = dcatl.leftCols(d_in);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(block.num_dst); ++i) {
      const auto bo = block.offsets[static_cast<std::size_t>(i)], eo = block.offsets[static_cast<std::size_t>(i) + 1];
      if (bo == eo) continue;
      const double inv = 1.0 / static_cast<double>(eo - bo);
      for (auto k = bo; k < eo; ++k) dsrc.row(block.neighbors[k]) += inv * daggl.row(i);
    }
    dout = std::move(dsrc);
  }

  g.for_each([](const std::string& name, const Tensor2& t) { require_finite(t, "gradient of " + name); });
  return g;
}

Tensor2 predict_batch(const ModelParams& params, const BatchBlocks& batch) {
  Tensor2 h = encode(batch, params);
  if (params.config.layers == 0) return classify(h, Tensor2::Zero(h.rows(), h.rows()), params);
  return classify(h, batch.seed_adjacency, params);
}

}  // namespace cadence
