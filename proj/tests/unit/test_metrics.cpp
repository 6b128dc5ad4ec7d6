#include <doctest.h>

#include <algorithm>
#include <set>

#include "cadence/checkpoint.hpp"
#include "cadence/error.hpp"
#include "cadence/features.hpp"
#include "cadence/metrics.hpp"
#include "cadence/random.hpp"
#include "cadence/splits.hpp"
#include "cadence/synthetic.hpp"
#include "group_scan.hpp"

using namespace cadence;

namespace {

Tensor2 random_probs(Random& rng, std::size_t n, int c) {
  Tensor2 p(static_cast<Eigen::Index>(n), c);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (int k = 0; k < c; ++k) p(r, k) = rng.unit() + 1e-3;
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("aggregation rules") {
  Tensor2 probs = Tensor2::Constant(4, 2, 0.5);
  std::vector<std::uint32_t> one_group(4, 0);
  auto none = aggregate(std::vector<int>{0, 0, 0, 0}, probs, std::vector<int>{0, 0, 0, 0}, one_group);
  CHECK(none.preds == std::vector<int>{0});
  CHECK(none.labels == std::vector<int>{0});
  auto any = aggregate(std::vector<int>{0, 0, 1, 0}, probs, std::vector<int>{0, 1, 0, 0}, one_group);
  CHECK(any.preds == std::vector<int>{1});
  CHECK(any.labels == std::vector<int>{1});

  Tensor2 p3(2, 3);
  p3 << 0.1, 0.6, 0.3, 0.1, 0.1, 0.8;
  std::vector<std::uint32_t> g2{0, 0};
  // class 2 has the larger summed probability
  CHECK(aggregate(std::vector<int>{1, 2}, p3, std::vector<int>{0, 0}, g2).preds == std::vector<int>{2});
  // gaps in group ids are skipped
  std::vector<std::uint32_t> gaps{0, 2};
  CHECK(aggregate(std::vector<int>{1, 0}, p3, std::vector<int>{1, 0}, gaps).preds.size() == 2);
}

TEST_CASE("aggregation matches the group-scan oracle") {
  Random rng(31);
  for (int t = 0; t < 200; ++t) {
    const int classes = 2 + static_cast<int>(rng.index(3));
    const std::size_t n = 1 + rng.index(40);
    const std::uint32_t groups_n = 1 + static_cast<std::uint32_t>(rng.index(n));
    std::vector<std::uint32_t> groups(n);
    for (std::uint32_t i = 0; i < n; ++i) groups[i] = i < groups_n ? i : static_cast<std::uint32_t>(rng.index(groups_n));
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.unit() < 0.3 ? static_cast<int>(rng.index(static_cast<std::size_t>(classes))) : 0;
      labels[i] = rng.unit() < 0.3 ? static_cast<int>(rng.index(static_cast<std::size_t>(classes))) : 0;
    }
    Tensor2 probs = random_probs(rng, n, classes);
    auto got = aggregate(preds, probs, labels, groups);
    auto want = oracle::group_scan(preds, probs, labels, groups, classes);
    CHECK(got.preds == want.preds);
    CHECK(got.labels == want.labels);

    // adding a positive node prediction never clears a group
    std::size_t v = rng.index(n);
    if (preds[v] == 0) {
      auto more = preds;
      more[v] = 1;
      auto after = aggregate(more, probs, labels, groups);
      for (std::size_t g = 0; g < got.preds.size(); ++g)
        if (got.preds[g] != 0) CHECK(after.preds[g] != 0);
    }
  }
}

TEST_CASE("group ids per level") {
  SynthOptions so;
  so.measures = 8;
  ScoreGraph g = build_score_graph(synthetic_piece("s", so, 1), LabelScheme{}, FeatureSet::general);
  auto notes = groups_for(g, Level::note);
  CHECK(notes[5] == 5);
  auto onsets = groups_for(g, Level::onset);
  auto beats = groups_for(g, Level::beat);
  for (std::uint32_t v = 1; v < g.n; ++v) {
    CHECK((onsets[v] == onsets[v - 1]) == (g.onsets[v] == g.onsets[v - 1]));
    if (onsets[v] == onsets[v - 1]) CHECK(beats[v] == beats[v - 1]);
  }
  CHECK(parse_levels("note,onset,beat") == std::vector<Level>{Level::note, Level::onset, Level::beat});
  CHECK_THROWS(parse_levels("note,bar"));
}

TEST_CASE("f1 report") {
  SUBCASE("perfect") {
    std::vector<int> y{0, 1, 0, 1};
    CHECK(f1_report(y, y, 2).headline_f1 == 1.0);
  }
  SUBCASE("tp=2 fp=1 fn=1") {
    std::vector<int> pred{1, 1, 1, 0, 0};
    std::vector<int> lab{1, 1, 0, 1, 0};
    MetricsReport r = f1_report(pred, lab, 2);
    CHECK(r.classes[1].precision == doctest::Approx(2.0 / 3));
    CHECK(r.classes[1].recall == doctest::Approx(2.0 / 3));
    CHECK(r.headline_f1 == doctest::Approx(2.0 / 3));
    CHECK(r.confusion[1][0] == 1);
    CHECK(r.confusion[0][1] == 1);
    CHECK(r.count == 5);
  }
  SUBCASE("no predicted positives") {
    MetricsReport r = f1_report(std::vector<int>{0, 0}, std::vector<int>{1, 0}, 2);
    CHECK(r.headline_f1 == 0.0);
    CHECK(r.classes[1].precision == 0.0);
  }
  SUBCASE("multiclass macro average includes class 0") {
    std::vector<int> pred{0, 1, 2, 2};
    std::vector<int> lab{0, 1, 2, 1};
    MetricsReport r = f1_report(pred, lab, 3);
    const double f1_1 = 2 * 1.0 * 0.5 / 1.5, f1_2 = 2 * 0.5 * 1.0 / 1.5;
    CHECK(r.macro_f1 == doctest::Approx((1.0 + f1_1 + f1_2) / 3));
    CHECK(r.headline_f1 == r.macro_f1);
    auto j = r.to_json();
    CHECK(j.contains("f1"));
    CHECK(j["per_class"].size() == 3);
  }
  CHECK_THROWS(f1_report(std::vector<int>{0}, std::vector<int>{0, 1}, 2));
}

TEST_CASE("splits") {
  SUBCASE("fixed list keeps the given order") {
    auto s = make_splits(names(24), SplitMode::fixed_list, 0);
    REQUIRE(s.size() == 1);
    CHECK(s[0].train.size() == 12);
    CHECK(s[0].test.size() == 12);
    CHECK(s[0].train.front() == "p1");
    CHECK(s[0].test.front() == "p13");
  }
  SUBCASE("random half is seeded") {
    auto a = make_splits(names(42), SplitMode::random_half, 5);
    auto b = make_splits(names(42), SplitMode::random_half, 5);
    auto c = make_splits(names(42), SplitMode::random_half, 6);
    CHECK(a[0].train == b[0].train);
    CHECK(a[0].train != c[0].train);
    CHECK(a[0].train.size() == 21);
  }
  SUBCASE("five folds on twenty pieces") {
    auto folds = make_splits(names(20), SplitMode::kfold, 1);
    REQUIRE(folds.size() == 5);
    std::set<std::string> tested;
    for (const auto& f : folds) {
      CHECK(f.test.size() == 4);
      CHECK(f.val.size() == 2);
      CHECK(f.train.size() == 14);
      std::set<std::string> all(f.train.begin(), f.train.end());
      for (const auto& list : {f.val, f.test})
        for (const auto& p : list) CHECK(all.insert(p).second);
      CHECK(all.size() == 20);
      tested.insert(f.test.begin(), f.test.end());
    }
    CHECK(tested.size() == 20);
  }
  CHECK_THROWS_AS(make_splits(names(1), SplitMode::fixed_list, 0), DataError);
  CHECK_THROWS_AS(make_splits(names(3), SplitMode::kfold, 0), DataError);
  CHECK(parse_split_mode("fixed-list") == SplitMode::fixed_list);
  CHECK(parse_split_mode("kfold") == SplitMode::kfold);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig mc{5, 4, 2, 3, "abcdef0123456789"};
  ModelParams p = ModelParams::glorot(mc, 12);
  std::string bytes = serialize_checkpoint(p, {{"note", "x"}});
  Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.params.config == mc);
  CHECK(serialize_checkpoint(back.params, {{"note", "x"}}) == bytes);
  CHECK(back.header["note"] == "x");
  p.for_each([&](const std::string& name, const Tensor2& t) {
    bool found = false;
    back.params.for_each([&](const std::string& other, const Tensor2& u) {
      if (other == name) {
        found = true;
        CHECK(t == u);
      }
    });
    CHECK(found);
  });

  std::string bad = bytes;
  bad[0] = 'Z';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), DataError);
}

TEST_CASE("synthetic corpus") {
  SynthOptions so;
  auto corpus = synthetic_corpus(6, so, 3);
  REQUIRE(corpus.size() == 6);
  CHECK(corpus[0].piece_id() == "synth01");
  std::size_t nodes = 0, positive = 0, cadences = 0;
  for (const auto& s : corpus) {
    cadences += s.annotations().size();
    auto l = assign_labels(s, LabelScheme{});
    CHECK(l.warnings.empty());
    nodes += s.size();
    for (int v : l.labels) positive += v != 0;
  }
  const double rate = static_cast<double>(positive) / static_cast<double>(nodes);
  CHECK(cadences > 6);
  CHECK(rate > 0.005);
  CHECK(rate < 0.03);
  // deterministic per seed
  CHECK(synthetic_corpus(2, so, 3)[1] == corpus[1]);
  so.mode = SynthMode::context;
  CHECK_FALSE(synthetic_piece("c", so, 1).annotations().empty());
  CHECK(parse_synth_mode("context") == SynthMode::context);
}
