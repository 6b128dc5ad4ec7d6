#include "cadence/training.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "cadence/error.hpp"
#include "cadence/metrics.hpp"

namespace cadence {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (hidden_dim <= 0) fail("hidden_dim must be positive");
  if (layers < 0) fail("layers must be >= 0");
  if (fanouts.size() != static_cast<std::size_t>(layers)) fail("fanouts must have one entry per layer");
  for (int f : fanouts)
    if (f <= 0) fail("fanouts must be positive");
  if (!(lr >= 0) || !(weight_decay >= 0)) fail("lr and weight_decay must be >= 0");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (smote_k < 1) fail("smote_k must be >= 1");
  if (!(gamma >= 0)) fail("gamma must be >= 0");
  if (!(tau >= 0)) fail("tau must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (scheme.positive.empty()) fail("class scheme is empty");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"hidden_dim", hidden_dim}, {"layers", layers},   {"fanouts", fanouts},
          {"lr", lr},                 {"weight_decay", weight_decay},
          {"batch_size", batch_size}, {"smote_k", smote_k}, {"gamma", gamma},
          {"tau", tau},               {"epochs", epochs},   {"seed", seed},
          {"scheme", scheme.to_string()}, {"feature_set", std::string(to_string(feature_set))}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "hidden_dim") c.hidden_dim = v.get<int>();
      else if (key == "layers") c.layers = v.get<int>();
      else if (key == "fanouts") c.fanouts = v.get<std::vector<int>>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "smote_k") c.smote_k = v.get<int>();
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "scheme") c.scheme = LabelScheme::parse(v.get<std::string>());
      else if (key == "feature_set") c.feature_set = parse_feature_set(v.get<std::string>());
      else throw std::invalid_argument("unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("train config: ") + e.what());
  }
  return c;
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j{{"epoch", epoch}, {"loss_total", loss_total}, {"loss_ce", loss_ce}, {"loss_bce", loss_bce}};
  j["val_macro_f1"] = val_macro_f1 ? nlohmann::json(*val_macro_f1) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------

BatchBlocks sample_neighbors(const ScoreGraph& g, std::span<const std::uint32_t> seeds, std::span<const int> fanouts,
                             Random& rng) {
  const std::size_t layers = fanouts.size();
  BatchBlocks b;
  b.seeds.assign(seeds.begin(), seeds.end());
  b.layer_nodes.assign(layers + 1, {});
  b.blocks.assign(layers, {});
  b.layer_nodes[layers] = b.seeds;

  std::vector<std::uint32_t> pool;
  for (std::size_t l = layers; l-- > 0;) {
    const auto& dst = b.layer_nodes[l + 1];
    auto& src = b.layer_nodes[l];
    src = dst;
    std::unordered_map<std::uint32_t, std::uint32_t> local;
    for (std::uint32_t i = 0; i < dst.size(); ++i) local.emplace(dst[i], i);

    Block& blk = b.blocks[l];
    blk.num_dst = static_cast<std::uint32_t>(dst.size());
    blk.offsets.assign(1, 0);
    const int fanout = fanouts[l];
    for (std::uint32_t v : dst) {
      auto nb = g.neighbors_of(v);
      pool.assign(nb.begin(), nb.end());
      std::size_t take = pool.size();
      if (fanout > 0 && pool.size() > static_cast<std::size_t>(fanout)) {
        take = static_cast<std::size_t>(fanout);
        for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
        std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
      }
      for (std::size_t i = 0; i < take; ++i) {
        auto [it, inserted] = local.emplace(pool[i], static_cast<std::uint32_t>(src.size()));
        if (inserted) src.push_back(pool[i]);
        blk.neighbors.push_back(it->second);
      }
      blk.offsets.push_back(static_cast<std::uint32_t>(blk.neighbors.size()));
    }
  }

  const auto& input_nodes = b.layer_nodes[0];
  b.input.resize(static_cast<Eigen::Index>(input_nodes.size()), g.features.cols());
  for (std::size_t r = 0; r < input_nodes.size(); ++r)
    b.input.row(static_cast<Eigen::Index>(r)) = g.features.row(input_nodes[r]).cast<double>();
  b.labels.reserve(seeds.size());
  for (auto s : seeds) b.labels.push_back(g.labels.empty() ? 0 : g.labels[s]);

  std::unordered_map<std::uint32_t, std::uint32_t> seed_index;
  for (std::uint32_t i = 0; i < seeds.size(); ++i) seed_index.emplace(seeds[i], i);
  b.seed_adjacency = Tensor2::Zero(static_cast<Eigen::Index>(seeds.size()), static_cast<Eigen::Index>(seeds.size()));
  for (std::uint32_t i = 0; i < seeds.size(); ++i)
    for (auto u : g.neighbors_of(seeds[i]))
      if (auto it = seed_index.find(u); it != seed_index.end()) b.seed_adjacency(i, it->second) = 1.0;
  return b;
}

// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
  long step = 0;
};

void adam_step(ModelParams& params, const ModelParams& grad, AdamState& st, double lr, double wd) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<const Tensor2*> grads;
  grad.for_each([&](const std::string&, const Tensor2& g) { grads.push_back(&g); });
  if (st.m.empty()) {
    for (auto* g : grads) {
      st.m.push_back(Tensor2::Zero(g->rows(), g->cols()));
      st.v.push_back(Tensor2::Zero(g->rows(), g->cols()));
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  std::size_t k = 0;
  params.for_each([&](const std::string&, Tensor2& w) {
    const Tensor2& g = *grads[k];
    Tensor2& m = st.m[k];
    Tensor2& v = st.v[k];
    ++k;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    w *= 1.0 - lr * wd;
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  });
}

std::vector<std::uint32_t> all_nodes(const ScoreGraph& g) {
  std::vector<std::uint32_t> v(g.n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

}  // namespace

TrainResult train(const ScoreGraph& train_graph, const ScoreGraph* val_graph, const TrainConfig& cfg,
                  const ModelParams* init, const TrainHooks& hooks) {
  cfg.validate();
  if (train_graph.n == 0) throw DataError("training graph is empty");
  const int classes = cfg.scheme.num_classes();
  for (auto l : train_graph.labels)
    if (l >= classes) throw DataError("training labels exceed the class scheme");

  ModelConfig mc;
  mc.input_dim = static_cast<int>(train_graph.features.cols());
  mc.hidden_dim = cfg.hidden_dim;
  mc.layers = cfg.layers;
  mc.num_classes = classes;
  mc.manifest_hash = train_graph.manifest.hash();

  Random rng(cfg.seed);
  const std::uint64_t init_seed = rng.fork();
  TrainResult result;
  if (init) {
    if (!(init->config == mc)) throw DataError("pretrained model does not match the training data or config");
    result.params = *init;
  } else {
    result.params = ModelParams::glorot(mc, init_seed);
  }
  ModelParams& params = result.params;
  ModelParams best = params;
  std::optional<double> best_f1;
  AdamState adam;
  const LossConfig lc = cfg.loss();

  std::vector<std::uint32_t> order = all_nodes(train_graph);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::uint32_t> seeds(order.data() + start, end - start);
      BatchBlocks batch = sample_neighbors(train_graph, seeds, cfg.fanouts, rng);
      ForwardState state;
      forward_encode(params, batch, state);
      const SmotePlan plan = plan_smote(state.h_enc, batch.labels, cfg.smote_k, rng);
      forward_head(params, batch, plan, lc, state);
      if (!std::isfinite(state.loss.total))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
      ModelParams grad = backward_train(params, batch, plan, state, lc);
      adam_step(params, grad, adam, cfg.lr, cfg.weight_decay);
      log.loss_total += state.loss.total;
      log.loss_ce += state.loss.ce;
      log.loss_bce += state.loss.bce;
      ++batches;
    }
    log.loss_total /= static_cast<double>(batches);
    log.loss_ce /= static_cast<double>(batches);
    log.loss_bce /= static_cast<double>(batches);
    if (!std::isfinite(log.loss_total)) throw NumericError("non-finite mean loss at epoch " + std::to_string(epoch));

    if (val_graph && val_graph->n > 0) {
      Tensor2 probs = predict(params, *val_graph);
      std::vector<int> labels(val_graph->labels.begin(), val_graph->labels.end());
      log.val_macro_f1 = f1_report(argmax_rows(probs), labels, classes).macro_f1;
      if (!best_f1 || *log.val_macro_f1 > *best_f1) {
        best_f1 = log.val_macro_f1;
        best = params;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  if (best_f1) {
    params = std::move(best);
  } else {
    result.best_epoch = cfg.epochs;
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<int> argmax_rows(const Tensor2& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()), 0);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Tensor2 predict(const ModelParams& params, const ScoreGraph& graph, const PredictOptions& opts) {
  if (params.config.manifest_hash != graph.manifest.hash())
    throw DataError("feature manifest mismatch: model " + params.config.manifest_hash + ", graph " +
                    graph.manifest.hash());
  if (graph.features.cols() != params.config.input_dim) throw DataError("graph feature width differs from the model");
  if (opts.batch_size <= 0) throw std::invalid_argument("predict batch size must be positive");

  const auto bs = static_cast<std::size_t>(opts.batch_size);
  const std::size_t num_batches = (graph.n + bs - 1) / bs;
  const std::vector<int> full(static_cast<std::size_t>(params.config.layers), 0);
  const bool use_adjacency = params.config.layers > 0;
  Tensor2 h(graph.n, params.config.latent_dim());
  Tensor2 out(graph.n, params.config.num_classes);

  auto seeds_of = [&](std::size_t b) {
    std::vector<std::uint32_t> seeds;
    for (std::size_t v = b * bs; v < std::min<std::size_t>(graph.n, (b + 1) * bs); ++v)
      seeds.push_back(static_cast<std::uint32_t>(v));
    return seeds;
  };
  // Pass 1 embeds every node from its complete neighborhood.
  auto encode_batch = [&](std::size_t b) {
    Random unused(0);
    BatchBlocks batch = sample_neighbors(graph, seeds_of(b), full, unused);
    h.middleRows(static_cast<Eigen::Index>(b * bs), static_cast<Eigen::Index>(batch.seeds.size())) =
        encode(batch, params);
  };
  // Pass 2 classifies each batch together with its out-of-batch neighbors, so
  // every node averages over all of its real neighbors.
  auto classify_batch = [&](std::size_t b) {
    std::vector<std::uint32_t> rows = seeds_of(b);
    const std::size_t own = rows.size();
    std::unordered_map<std::uint32_t, std::uint32_t> local;
    for (std::uint32_t i = 0; i < own; ++i) local.emplace(rows[i], i);
    if (use_adjacency)
      for (std::size_t i = 0; i < own; ++i)
        for (auto u : graph.neighbors_of(rows[i]))
          if (local.emplace(u, static_cast<std::uint32_t>(rows.size())).second) rows.push_back(u);
    const auto m = static_cast<Eigen::Index>(rows.size());
    Tensor2 h_local(m, h.cols());
    for (Eigen::Index r = 0; r < m; ++r) h_local.row(r) = h.row(rows[static_cast<std::size_t>(r)]);
    Tensor2 a = Tensor2::Zero(m, m);
    if (use_adjacency)
      for (std::size_t i = 0; i < own; ++i)
        for (auto u : graph.neighbors_of(rows[i])) a(static_cast<Eigen::Index>(i), local.at(u)) = 1.0;
    Tensor2 p = classify(h_local, a, params);
    out.middleRows(static_cast<Eigen::Index>(b * bs), static_cast<Eigen::Index>(own)) =
        p.topRows(static_cast<Eigen::Index>(own));
  };

  std::exception_ptr error;
  std::mutex error_mutex;
  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(num_batches)));
  for (auto step : {std::function<void(std::size_t)>(encode_batch), std::function<void(std::size_t)>(classify_batch)}) {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      try {
        for (std::size_t b = next++; b < num_batches; b = next++) step(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = num_batches;
      }
    };
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (error) break;
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace cadence
