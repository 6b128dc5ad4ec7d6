// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 1 4 7      run a subset
//
// Criterion 8 reads a **kern corpus from $CADENCE_BACH_KERN_DIR and reports
// SKIP when the variable is unset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "cadence/checkpoint.hpp"
#include "cadence/features.hpp"
#include "cadence/graph.hpp"
#include "cadence/kern.hpp"
#include "cadence/metrics.hpp"
#include "cadence/synthetic.hpp"
#include "cadence/training.hpp"
#include "edge_oracle.hpp"
#include "finite_diff.hpp"
#include "jacobi.hpp"
#include "random_inputs.hpp"
#include "toy_batch.hpp"

using namespace cadence;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// --- 1 ----------------------------------------------------------------------

Outcome gradients() {
  std::size_t coords = 0, failures = 0, kinks = 0;
  double worst = 0, worst_abs = 0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto t = oracle::toy_problem(seed, 2, 8);
    auto r = oracle::check_gradients(t.params, t.batch, t.plan, LossConfig{}, 1e-5, 1e-4, 1e-8);
    coords += r.coords;
    failures += r.failures;
    kinks += r.kink_coords;
    worst_abs = std::max(worst_abs, r.worst_abs);
    if (r.worst_rel > worst) {
      worst = r.worst_rel;
      where = "graph " + std::to_string(seed) + " " + r.worst_name;
    }
  }
  return {failures == 0 ? Verdict::pass : Verdict::fail,
          fmt("10 graphs, %zu coordinates, %zu failing, worst abs err %.1e, worst rel err above the 1e-8 floor %.1e%s, "
              "%zu at activation kinks",
              coords, failures, worst_abs, worst, where.empty() ? "" : (" at " + where).c_str(), kinks)};
}

// --- 2 ----------------------------------------------------------------------

Outcome edges() {
  Random rng(2002);
  int mismatches = 0;
  std::size_t total = 0;
  for (int t = 0; t < 200; ++t) {
    Score s = oracle::random_score(rng, 50, "r" + std::to_string(t));
    EdgeList got = build_edges(s);
    total += got.pairs.size();
    if (got.pairs != oracle::brute_force_edges(s).pairs) ++mismatches;
  }
  return {mismatches == 0 ? Verdict::pass : Verdict::fail,
          fmt("200 scores, %zu edges, %d mismatching scores", total, mismatches)};
}

// --- 3 ----------------------------------------------------------------------

Outcome smote() {
  Random rng(3003);
  int bad_counts = 0, bad_rows = 0, batches = 0;
  std::size_t synthetic = 0;
  for (int t = 0; t < 100; ++t) {
    const int classes = t % 3 == 0 ? 3 : 2;
    const auto n = static_cast<std::uint32_t>(20 + rng.index(80));
    std::vector<int> labels(n, 0);
    for (auto& l : labels)
      if (rng.unit() < 0.15) l = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(classes - 1)));
    ScoreGraph g = oracle::random_graph(rng, n, 0.05, 5, labels);
    std::vector<std::uint32_t> seeds;
    for (std::uint32_t v = 0; v < n; ++v)
      if (rng.unit() < 0.6) seeds.push_back(v);
    if (seeds.empty()) seeds.push_back(0);
    BatchBlocks b = sample_neighbors(g, seeds, std::vector<int>{4, 4}, rng);
    ModelConfig mc{5, 8, 2, classes, g.manifest.hash()};
    ModelParams p = ModelParams::glorot(mc, rng.fork());
    Tensor2 h = encode(b, p);
    SmotePlan plan = plan_smote(h, b.labels, 3, rng);
    Tensor2 hs = apply_smote(h, plan);
    ++batches;
    synthetic += plan.rows.size();

    std::map<int, int> count;
    for (int l : b.labels) ++count[l];
    std::map<int, int> original = count;
    for (const auto& r : plan.rows) ++count[r.label];
    int target = 0;
    for (auto [c, k] : count) target = std::max(target, k);
    for (auto [c, k] : original)
      if (k >= 2 && count[c] != target) ++bad_counts;

    for (std::size_t r = 0; r < plan.rows.size(); ++r) {
      const auto& sr = plan.rows[r];
      const auto row = hs.row(h.rows() + static_cast<Eigen::Index>(r));
      bool ok = b.labels[sr.anchor] == sr.label && b.labels[sr.neighbor] == sr.label && sr.anchor != sr.neighbor &&
                sr.lambda >= 0 && sr.lambda <= 1;
      for (Eigen::Index c = 0; c < h.cols() && ok; ++c) {
        const double a = h(sr.anchor, c), z = h(sr.neighbor, c);
        const double want = a + sr.lambda * (z - a);
        ok = std::abs(row(c) - want) <= 1e-12 && row(c) >= std::min(a, z) - 1e-12 && row(c) <= std::max(a, z) + 1e-12;
      }
      if (!ok) ++bad_rows;
    }
  }
  return {bad_counts == 0 && bad_rows == 0 ? Verdict::pass : Verdict::fail,
          fmt("%d batches, %zu synthetic rows, %d unbalanced classes, %d non-convex rows", batches, synthetic,
              bad_counts, bad_rows)};
}

// --- 4 ----------------------------------------------------------------------

Outcome spectral() {
  Random rng(4004);
  int bad = 0, checked_padding = 0;
  double worst_residual = 0, worst_ortho = 0, worst_value = 0;
  for (int t = 0; t < 50; ++t) {
    const auto n = static_cast<std::uint32_t>(t < 5 ? 2 + rng.index(18) : 2 + rng.index(199));
    const double p = std::min(1.0, (1.0 + 6.0 * rng.unit()) / n);
    ScoreGraph g = oracle::random_graph(rng, n, p, 1);
    const Eigen::MatrixXd lap = oracle::dense_normalized_laplacian(g);
    const auto ref = oracle::jacobi_eigen(lap);
    // alternate the two solver paths
    SpectralOptions opts;
    opts.dense_limit = t % 2 == 0 ? 2000u : 1u;
    SpectralResult r = laplacian_eigenvectors(g, opts);
    const int k = opts.k;
    for (int j = 0; j < r.found; ++j) {
      Eigen::VectorXd v = r.vectors.col(j);
      worst_residual = std::max(worst_residual, (lap * v - r.values(j) * v).norm());
      worst_value = std::max(worst_value, std::abs(r.values(j) - ref.values(j)));
      for (int i = 0; i <= j; ++i)
        worst_ortho = std::max(worst_ortho, std::abs(v.dot(r.vectors.col(i)) - (i == j ? 1.0 : 0.0)));
    }
    if (static_cast<int>(n) < k) {
      ++checked_padding;
      if (r.found != static_cast<int>(n) || !r.vectors.rightCols(k - n).isZero(0)) ++bad;
    }
  }
  const bool ok = bad == 0 && worst_residual <= 1e-6 && worst_ortho <= 1e-6 && worst_value <= 1e-6;
  return {ok ? Verdict::pass : Verdict::fail,
          fmt("50 graphs, max |Lv-lv| %.1e, max orthonormality err %.1e, max eigenvalue diff vs Jacobi %.1e, "
              "%d padded graphs, %d padding errors",
              worst_residual, worst_ortho, worst_value, checked_padding, bad)};
}

// --- 5 and 6 ------------------------------------------------------------------

struct Corpus {
  ScoreGraph train, test;
  double positive_rate = 0;
};

Corpus synthetic_split(SynthMode mode, FeatureSet set, std::uint64_t seed) {
  SynthOptions so;
  so.mode = mode;
  std::vector<ScoreGraph> train, test;
  std::size_t nodes = 0, positive = 0;
  auto pieces = synthetic_corpus(20, so, seed);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    ScoreGraph g = build_score_graph(pieces[i], LabelScheme{}, set);
    nodes += g.n;
    for (auto l : g.labels) positive += l != 0;
    (i < 15 ? train : test).push_back(std::move(g));
  }
  return {disjoint_union(train), disjoint_union(test), static_cast<double>(positive) / static_cast<double>(nodes)};
}

double note_f1(const ModelParams& p, const ScoreGraph& g) {
  Tensor2 probs = predict(p, g);
  std::vector<int> labels(g.labels.begin(), g.labels.end());
  return f1_report(argmax_rows(probs), labels, 2).headline_f1;
}

TrainConfig scaled_config(std::uint64_t seed, int epochs) {
  TrainConfig cfg;
  cfg.hidden_dim = 64;
  cfg.batch_size = 256;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

Outcome learnability() {
  const int epochs = 30;
  Corpus c = synthetic_split(SynthMode::local, FeatureSet::all, 55);
  std::vector<double> train_f1, test_f1;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainResult r = train(c.train, nullptr, scaled_config(seed, epochs));
    train_f1.push_back(note_f1(r.params, c.train));
    test_f1.push_back(note_f1(r.params, c.test));
    per_seed += fmt(" %.3f/%.3f", train_f1.back(), test_f1.back());
  }
  const double tr = median3(train_f1), te = median3(test_f1);
  return {tr >= 0.90 && te >= 0.70 ? Verdict::pass : Verdict::fail,
          fmt("positive rate %.2f%%, %d epochs, median note F1 train %.3f (>= 0.90) test %.3f (>= 0.70); "
              "per seed train/test:%s",
              100 * c.positive_rate, epochs, tr, te, per_seed.c_str())};
}

Outcome depth_ablation() {
  const int epochs = 20;
  Corpus c = synthetic_split(SynthMode::context, FeatureSet::general, 66);
  std::vector<double> deep, flat;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig two = scaled_config(seed, epochs);
    TrainConfig zero = two;
    zero.layers = 0;
    zero.fanouts.clear();
    deep.push_back(note_f1(train(c.train, nullptr, two).params, c.test));
    flat.push_back(note_f1(train(c.train, nullptr, zero).params, c.test));
    per_seed += fmt(" %.3f/%.3f", deep.back(), flat.back());
  }
  const double d = median3(deep), f = median3(flat);
  return {d - f >= 0.05 ? Verdict::pass : Verdict::fail,
          fmt("positive rate %.2f%%, %d epochs, median test F1 2-hop %.3f vs 0-hop %.3f, gap %.3f (>= 0.05); "
              "per seed 2-hop/0-hop:%s",
              100 * c.positive_rate, epochs, d, f, d - f, per_seed.c_str())};
}

// --- 7 ----------------------------------------------------------------------

Outcome determinism() {
  SynthOptions so;
  so.measures = 24;
  std::vector<ScoreGraph> graphs;
  for (const auto& s : synthetic_corpus(4, so, 77)) graphs.push_back(build_score_graph(s, LabelScheme{}, FeatureSet::all));
  ScoreGraph train_graph = disjoint_union(std::span(graphs).first(3));
  ScoreGraph val_graph = graphs[3];
  TrainConfig cfg = scaled_config(7, 3);
  cfg.hidden_dim = 32;

  auto run = [&](std::uint64_t seed) {
    TrainConfig c = cfg;
    c.seed = seed;
    TrainResult r = train(train_graph, &val_graph, c);
    Tensor2 probs = predict(r.params, val_graph);
    std::vector<int> preds = argmax_rows(probs), labels(val_graph.labels.begin(), val_graph.labels.end());
    nlohmann::json metrics = nlohmann::json::object();
    for (Level l : {Level::note, Level::onset, Level::beat}) {
      auto o = aggregate(preds, probs, labels, groups_for(val_graph, l));
      metrics[std::string(to_string(l))] = f1_report(o.preds, o.labels, 2).to_json();
    }
    std::string log;
    for (const auto& e : r.log) log += e.to_json().dump() + "\n";
    return std::tuple{serialize_checkpoint(r.params, {{"train", c.to_json()}}), metrics.dump(), log};
  };
  auto [ck1, m1, l1] = run(7);
  auto [ck2, m2, l2] = run(7);
  auto [ck3, m3, l3] = run(8);
  const bool same = ck1 == ck2 && m1 == m2 && l1 == l2;
  return {same && ck1 != ck3 ? Verdict::pass : Verdict::fail,
          fmt("checkpoint %zu bytes identical: %s, metrics identical: %s, logs identical: %s, other seed differs: %s",
              ck1.size(), ck1 == ck2 ? "yes" : "no", m1 == m2 ? "yes" : "no", l1 == l2 ? "yes" : "no",
              ck1 != ck3 ? "yes" : "no")};
}

// --- 8 ----------------------------------------------------------------------

Outcome bach_corpus() {
  const char* dir = std::getenv("CADENCE_BACH_KERN_DIR");
  if (!dir || !*dir) return {Verdict::skip, "CADENCE_BACH_KERN_DIR not set; corpus is not bundled"};
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".krn") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::size_t nodes = 0, edges = 0, failed = 0, warnings = 0;
  for (const auto& f : files) {
    try {
      std::vector<std::string> w;
      Score s = parse_kern(io::read_file(f.string()), f.stem().string(), &w);
      warnings += w.size();
      nodes += s.size();
      edges += build_edges(s).pairs.size();
    } catch (const std::exception& e) {
      ++failed;
      std::cerr << "  " << f.filename().string() << ": " << e.what() << "\n";
    }
  }
  const double node_dev = (static_cast<double>(nodes) - 24567) / 24567;
  const double edge_dev = (static_cast<double>(edges) - 229107) / 229107;
  const bool ok = files.size() == 24 && failed == 0 && std::abs(node_dev) <= 0.10 && std::abs(edge_dev) <= 0.15;
  return {ok ? Verdict::pass : Verdict::fail,
          fmt("%zu files (%zu failed, %zu warnings), nodes %zu (%+.1f%% vs 24567, tol 10%%), undirected edges %zu "
              "(%+.1f%% vs 229107, tol 15%%; directed %zu)",
              files.size(), failed, warnings, nodes, 100 * node_dev, edges, 100 * edge_dev, 2 * edges)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},       {"edge builder vs oracle", edges},
      {"SMOTE invariants", smote},               {"spectral features", spectral},
      {"synthetic learnability", learnability}, {"depth ablation trend", depth_ablation},
      {"determinism", determinism},              {"Bach WTC-I corpus statistics", bach_corpus},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // runtime budgets
    if (o.verdict == Verdict::pass && ((id == 1 && secs > 120) || (id == 2 && secs > 10) || (id == 5 && secs > 600))) {
      o.verdict = Verdict::fail;
      o.detail += "; over the runtime budget";
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    failures += o.verdict == Verdict::fail;
    std::cout << tag << " " << id << " " << criteria[i].first << ": " << o.detail << " [" << fmt("%.1f", secs)
              << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
