#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "cadence/checkpoint.hpp"
#include "cadence/error.hpp"
#include "cadence/features.hpp"
#include "cadence/synthetic.hpp"
#include "cadence/training.hpp"
#include "random_inputs.hpp"

using namespace cadence;

namespace {

std::set<std::uint32_t> within_hops(const ScoreGraph& g, const std::vector<std::uint32_t>& seeds, int hops) {
  std::set<std::uint32_t> seen(seeds.begin(), seeds.end());
  std::vector<std::uint32_t> frontier = seeds;
  for (int h = 0; h < hops; ++h) {
    std::vector<std::uint32_t> next;
    for (auto v : frontier)
      for (auto u : g.neighbors_of(v))
        if (seen.insert(u).second) next.push_back(u);
    frontier = std::move(next);
  }
  return seen;
}

ScoreGraph small_corpus(int pieces, std::uint64_t seed, SynthMode mode = SynthMode::local) {
  SynthOptions so;
  so.mode = mode;
  so.measures = 24;
  std::vector<ScoreGraph> graphs;
  for (const auto& s : synthetic_corpus(pieces, so, seed))
    graphs.push_back(build_score_graph(s, LabelScheme{}, FeatureSet::all));
  return disjoint_union(graphs);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden_dim = 16;
  cfg.batch_size = 256;
  cfg.epochs = 2;
  cfg.fanouts = {5, 5};
  return cfg;
}

}  // namespace

TEST_CASE("neighbor sampling") {
  Random rng(3);
  ScoreGraph g = oracle::random_graph(rng, 60, 0.08, 3, std::vector<int>(60, 1));
  std::vector<std::uint32_t> seeds{4, 17, 33};

  SUBCASE("large fanouts give the full two-hop neighborhood") {
    Random r(1);
    BatchBlocks b = sample_neighbors(g, seeds, std::vector<int>{100, 100}, r);
    std::set<std::uint32_t> got(b.layer_nodes[0].begin(), b.layer_nodes[0].end());
    CHECK(got == within_hops(g, seeds, 2));
    for (std::uint32_t i = 0; i < 3; ++i)
      CHECK(b.blocks[1].offsets[i + 1] - b.blocks[1].offsets[i] == g.degree(seeds[i]));
    // fanout <= 0 means every neighbor
    Random r2(1);
    BatchBlocks all = sample_neighbors(g, seeds, std::vector<int>{0, -1}, r2);
    CHECK(all.layer_nodes == b.layer_nodes);
  }
  SUBCASE("fanouts cap sampled neighbors without repeats") {
    Random r(2);
    BatchBlocks b = sample_neighbors(g, seeds, std::vector<int>{1, 2}, r);
    REQUIRE(b.blocks.size() == 2);
    for (std::size_t l = 0; l < 2; ++l) {
      const Block& blk = b.blocks[l];
      const int cap = l == 0 ? 1 : 2;
      CHECK(blk.num_dst == b.layer_nodes[l + 1].size());
      for (std::uint32_t d = 0; d < blk.num_dst; ++d) {
        const std::uint32_t v = b.layer_nodes[l + 1][d];
        const auto k = blk.offsets[d + 1] - blk.offsets[d];
        CHECK(k == std::min<std::uint32_t>(g.degree(v), static_cast<std::uint32_t>(cap)));
        std::set<std::uint32_t> uniq;
        for (auto i = blk.offsets[d]; i < blk.offsets[d + 1]; ++i) {
          const std::uint32_t u = b.layer_nodes[l][blk.neighbors[i]];
          auto nb = g.neighbors_of(v);
          CHECK(std::binary_search(nb.begin(), nb.end(), u));
          uniq.insert(u);
        }
        CHECK(uniq.size() == k);
      }
      // destination nodes lead the source list
      CHECK(std::equal(b.layer_nodes[l + 1].begin(), b.layer_nodes[l + 1].end(), b.layer_nodes[l].begin()));
    }
  }
  SUBCASE("isolated seed") {
    EdgeList none;
    ScoreGraph lone = adjacency_only(3, none);
    lone.features = FeatureMatrix::Ones(3, 2);
    Random r(0);
    std::vector<std::uint32_t> s{1};
    BatchBlocks b = sample_neighbors(lone, s, std::vector<int>{10, 25}, r);
    CHECK(b.layer_nodes[0] == std::vector<std::uint32_t>{1});
    CHECK(b.blocks[0].neighbors.empty());
  }
  SUBCASE("same seed, same blocks") {
    Random a(11), b(11);
    auto x = sample_neighbors(g, seeds, std::vector<int>{2, 3}, a);
    auto y = sample_neighbors(g, seeds, std::vector<int>{2, 3}, b);
    CHECK(x.layer_nodes == y.layer_nodes);
    CHECK(x.blocks[0].neighbors == y.blocks[0].neighbors);
    CHECK(x.blocks[1].neighbors == y.blocks[1].neighbors);
  }
  SUBCASE("seed adjacency mirrors the graph") {
    Random r(5);
    std::vector<std::uint32_t> many(20);
    std::iota(many.begin(), many.end(), 0u);
    BatchBlocks b = sample_neighbors(g, many, std::vector<int>{3, 3}, r);
    for (std::uint32_t i = 0; i < 20; ++i)
      for (std::uint32_t j = 0; j < 20; ++j) {
        auto nb = g.neighbors_of(i);
        CHECK(b.seed_adjacency(i, j) == (std::binary_search(nb.begin(), nb.end(), j) ? 1.0 : 0.0));
      }
  }
}

TEST_CASE("train config") {
  TrainConfig cfg;
  CHECK(cfg.hidden_dim == 256);
  CHECK(cfg.fanouts == std::vector<int>{10, 25});
  CHECK(cfg.lr == 0.007);
  CHECK(cfg.weight_decay == 0.007);
  CHECK(cfg.batch_size == 1024);
  CHECK(cfg.smote_k == 3);
  CHECK(cfg.gamma == 0.5);
  CHECK(cfg.tau == 0.5);
  CHECK_NOTHROW(cfg.validate());

  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(TrainConfig::from_json({{"lr", 0.1}}).lr == 0.1);
  CHECK_THROWS(TrainConfig::from_json({{"learning_rate", 0.1}}));

  TrainConfig bad = cfg;
  bad.fanouts = {10};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.fanouts = {10, 0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.layers = 0;
  bad.fanouts = {};
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  ScoreGraph g = small_corpus(2, 1);
  TrainConfig cfg = small_config();
  cfg.lr = 0;
  ModelConfig mc{static_cast<int>(g.features.cols()), cfg.hidden_dim, cfg.layers, 2, g.manifest.hash()};
  ModelParams init = ModelParams::glorot(mc, 99);
  TrainResult r = train(g, nullptr, cfg, &init);
  CHECK(serialize_checkpoint(r.params) == serialize_checkpoint(init));
  CHECK(r.log.size() == 2);
}

TEST_CASE("training is deterministic and logs every epoch") {
  ScoreGraph g = small_corpus(2, 2);
  TrainConfig cfg = small_config();
  cfg.seed = 7;
  int calls = 0;
  TrainHooks hooks{[&](const EpochLog& e) { CHECK(e.epoch == ++calls); }};
  TrainResult a = train(g, nullptr, cfg, nullptr, hooks);
  TrainResult b = train(g, nullptr, cfg);
  CHECK(calls == 2);
  CHECK(serialize_checkpoint(a.params) == serialize_checkpoint(b.params));
  for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(a.log[e].to_json() == b.log[e].to_json());
  CHECK(a.best_epoch == 2);
  CHECK(a.log[0].loss_total == doctest::Approx(a.log[0].loss_ce + cfg.gamma * a.log[0].loss_bce));
  cfg.seed = 8;
  CHECK(serialize_checkpoint(train(g, nullptr, cfg).params) != serialize_checkpoint(a.params));
}

TEST_CASE("validation selects the best epoch") {
  ScoreGraph g = small_corpus(2, 3);
  ScoreGraph v = small_corpus(1, 4);
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  TrainResult r = train(g, &v, cfg);
  REQUIRE(r.log.size() == 3);
  double best = -1;
  int best_epoch = 0;
  for (const auto& e : r.log) {
    REQUIRE(e.val_macro_f1.has_value());
    if (*e.val_macro_f1 > best) {
      best = *e.val_macro_f1;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.log[0].to_json().contains("val_macro_f1"));
}

TEST_CASE("training loss decreases over the first epochs") {
  ScoreGraph g = small_corpus(3, 5);
  std::vector<std::vector<double>> curves;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = small_config();
    cfg.epochs = 5;
    cfg.seed = seed;
    std::vector<double> c;
    for (const auto& e : train(g, nullptr, cfg).log) c.push_back(e.loss_total);
    curves.push_back(c);
  }
  std::vector<double> median;
  for (std::size_t e = 0; e < 5; ++e) {
    std::vector<double> at;
    for (const auto& c : curves) at.push_back(c[e]);
    std::nth_element(at.begin(), at.begin() + 2, at.end());
    median.push_back(at[2]);
  }
  CAPTURE(median);
  for (std::size_t e = 1; e < 5; ++e) CHECK(median[e] < median[e - 1]);
}

TEST_CASE("train rejects mismatched inputs") {
  ScoreGraph g = small_corpus(1, 6);
  TrainConfig cfg = small_config();
  ModelConfig other{10, 16, 2, 2, "x"};
  ModelParams init = ModelParams::glorot(other, 1);
  CHECK_THROWS_AS(train(g, nullptr, cfg, &init), DataError);
  cfg.scheme = LabelScheme::parse("PAC,HC");
  ModelConfig mc{static_cast<int>(g.features.cols()), 16, 2, 2, g.manifest.hash()};
  init = ModelParams::glorot(mc, 1);
  CHECK_THROWS_AS(train(g, nullptr, cfg, &init), DataError);
}

TEST_CASE("predict") {
  ScoreGraph g = small_corpus(1, 7);
  ModelConfig mc{static_cast<int>(g.features.cols()), 8, 2, 2, g.manifest.hash()};
  ModelParams p = ModelParams::glorot(mc, 3);

  SUBCASE("zero projection gives uniform probabilities") {
    p.proj.setZero();
    CHECK(predict(p, g).isConstant(0.5, 1e-15));
  }
  SUBCASE("rows are distributions and threads agree") {
    Tensor2 one = predict(p, g, {64, 1});
    Tensor2 many = predict(p, g, {64, 4});
    CHECK(one == many);
    CHECK(one.rows() == g.n);
    for (Eigen::Index r = 0; r < one.rows(); ++r) CHECK(std::abs(one.row(r).sum() - 1) < 1e-9);
    // batch size does not change full-neighborhood inference
    CHECK(predict(p, g, {1000, 1}).isApprox(one, 1e-12));
  }
  SUBCASE("manifest mismatch is refused") {
    p.config.manifest_hash = "0000000000000000";
    CHECK_THROWS_AS(predict(p, g), DataError);
  }
  SUBCASE("argmax ties go to the lower class") {
    Tensor2 t(2, 3);
    t << 0.4, 0.4, 0.2, 0.1, 0.2, 0.7;
    CHECK(argmax_rows(t) == std::vector<int>{0, 2});
  }
}
