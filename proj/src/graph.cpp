#include "cadence/graph.hpp"

#include <algorithm>
#include <map>

#include "binary_io.hpp"
#include "cadence/error.hpp"

namespace cadence {

std::size_t EdgeList::count(EdgeTag t) const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [t](const Edge& e) { return e.tag == t; }));
}

EdgeList build_edges(const Score& score) {
  const auto& notes = score.notes();
  const std::size_t n = notes.size();
  // Notes are sorted by onset, so each onset owns a contiguous id range.
  std::map<std::pair<std::uint32_t, std::uint32_t>, EdgeTag> best;
  auto put = [&best](std::uint32_t a, std::uint32_t b, EdgeTag t) {
    if (a == b) return;
    auto key = std::minmax(a, b);
    auto [it, inserted] = best.emplace(std::pair{key.first, key.second}, t);
    if (!inserted && static_cast<int>(t) < static_cast<int>(it->second)) it->second = t;
  };
  auto first_at_or_after = [&notes](const Rational& t) {
    return static_cast<std::size_t>(
        std::lower_bound(notes.begin(), notes.end(), t, [](const NoteEvent& x, const Rational& v) { return x.onset < v; }) -
        notes.begin());
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = notes[i];
    for (std::size_t j = i + 1; j < n && notes[j].onset == a.onset; ++j)
      put(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), EdgeTag::ON);

    Rational off = a.offset();
    std::size_t lo = first_at_or_after(a.onset);
    while (lo < n && notes[lo].onset == a.onset) ++lo;  // strictly later onsets
    std::size_t hi = first_at_or_after(off);
    for (std::size_t j = lo; j < hi; ++j) put(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), EdgeTag::DUR);
    for (std::size_t j = hi; j < n && notes[j].onset == off; ++j)
      put(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), EdgeTag::CONS);
  }

  EdgeList out;
  out.pairs.reserve(best.size());
  for (const auto& [key, tag] : best) out.pairs.push_back({key.first, key.second, tag});
  return out;
}

const std::string& ScoreGraph::piece_id() const {
  static const std::string empty;
  if (pieces.empty()) return empty;
  if (pieces.size() > 1) throw DataError("piece_id() on a multi-piece graph");
  return pieces.front().piece_id;
}

std::size_t ScoreGraph::piece_of(std::uint32_t v) const {
  auto it = std::upper_bound(pieces.begin(), pieces.end(), v,
                             [](std::uint32_t x, const PieceSpan& p) { return x < p.first; });
  if (it == pieces.begin()) throw DataError("node outside every piece span");
  return static_cast<std::size_t>(it - pieces.begin()) - 1;
}

namespace {

void fill_csr(ScoreGraph& g, std::uint32_t n, const EdgeList& edges) {
  g.n = n;
  std::vector<std::vector<std::pair<std::uint32_t, EdgeTag>>> adj(n);
  for (const auto& e : edges.pairs) {
    if (e.i >= n || e.j >= n) throw DataError("edge references node outside 0..n-1");
    if (e.i == e.j) throw DataError("self-loop in edge list");
    adj[e.i].push_back({e.j, e.tag});
    adj[e.j].push_back({e.i, e.tag});
  }
  g.offsets.assign(n + 1, 0);
  g.neighbors.clear();
  g.tags.clear();
  g.neighbors.reserve(edges.pairs.size() * 2);
  for (std::uint32_t v = 0; v < n; ++v) {
    auto& list = adj[v];
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (k > 0 && list[k].first == list[k - 1].first) throw DataError("duplicate edge in edge list");
      g.neighbors.push_back(list[k].first);
      g.tags.push_back(list[k].second);
    }
    g.offsets[v + 1] = static_cast<std::uint32_t>(g.neighbors.size());
  }
}

}  // namespace

ScoreGraph adjacency_only(std::uint32_t n, const EdgeList& edges) {
  ScoreGraph g;
  fill_csr(g, n, edges);
  return g;
}

ScoreGraph to_graph(const Score& score, const EdgeList& edges, FeatureMatrix features, FeatureManifest manifest,
                    std::vector<int> labels) {
  const auto n = static_cast<std::uint32_t>(score.size());
  if (static_cast<std::size_t>(features.rows()) != n)
    throw DataError("feature rows (" + std::to_string(features.rows()) + ") != node count (" + std::to_string(n) + ")");
  if (static_cast<std::size_t>(features.cols()) != manifest.size())
    throw DataError("feature width does not match the manifest");
  if (labels.size() != n) throw DataError("label count does not match node count");

  ScoreGraph g;
  fill_csr(g, n, edges);
  g.features = std::move(features);
  g.manifest = std::move(manifest);
  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] > 255) throw DataError("label out of range");
    g.labels[i] = static_cast<std::uint8_t>(labels[i]);
  }
  g.onset_group.resize(n);
  g.beat_group.resize(n);
  g.onsets.resize(n);
  std::map<Rational, std::uint32_t> beat_ids;
  std::uint32_t onset_id = 0;
  for (std::uint32_t v = 0; v < n; ++v) {
    const auto& note = score.notes()[v];
    if (v > 0 && note.onset != score.notes()[v - 1].onset) ++onset_id;
    g.onset_group[v] = onset_id;
    g.onsets[v] = note.onset;
    auto bs = beat_of(score, note.onset).beat_start;
    auto [it, inserted] = beat_ids.emplace(bs, static_cast<std::uint32_t>(beat_ids.size()));
    g.beat_group[v] = it->second;
  }
  g.pieces = {PieceSpan{score.piece_id(), 0, n}};
  return g;
}

ScoreGraph disjoint_union(std::span<const ScoreGraph> graphs) {
  ScoreGraph out;
  out.pieces.clear();
  if (graphs.empty()) return out;
  out.manifest = graphs.front().manifest;
  std::size_t total = 0, nnz = 0;
  for (const auto& g : graphs) {
    if (!(g.manifest == out.manifest)) throw DataError("cannot merge graphs with different feature manifests");
    total += g.n;
    nnz += g.neighbors.size();
  }
  const auto d = static_cast<Eigen::Index>(out.manifest.size());
  out.n = static_cast<std::uint32_t>(total);
  out.features.resize(static_cast<Eigen::Index>(total), d);
  out.neighbors.reserve(nnz);
  out.tags.reserve(nnz);
  std::uint32_t base = 0, onset_base = 0, beat_base = 0;
  for (const auto& g : graphs) {
    for (std::uint32_t v = 0; v < g.n; ++v) {
      for (auto u : g.neighbors_of(v)) out.neighbors.push_back(u + base);
      out.offsets.push_back(static_cast<std::uint32_t>(out.neighbors.size()));
    }
    out.tags.insert(out.tags.end(), g.tags.begin(), g.tags.end());
    if (g.n > 0) out.features.middleRows(base, g.n) = g.features;
    out.labels.insert(out.labels.end(), g.labels.begin(), g.labels.end());
    std::uint32_t max_onset = 0, max_beat = 0;
    for (std::uint32_t v = 0; v < g.n; ++v) {
      out.onset_group.push_back(g.onset_group[v] + onset_base);
      out.beat_group.push_back(g.beat_group[v] + beat_base);
      max_onset = std::max(max_onset, g.onset_group[v] + 1);
      max_beat = std::max(max_beat, g.beat_group[v] + 1);
    }
    out.onsets.insert(out.onsets.end(), g.onsets.begin(), g.onsets.end());
    for (const auto& p : g.pieces) out.pieces.push_back({p.piece_id, p.first + base, p.count});
    base += g.n;
    onset_base += max_onset;
    beat_base += max_beat;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string serialize_graph(const ScoreGraph& g) {
  io::Writer w;
  w.bytes("SGGR");
  w.scalar<std::uint16_t>(kGraphFormatVersion);
  w.scalar<std::uint32_t>(g.n);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(g.manifest.size()));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(g.num_edges()));
  for (auto o : g.offsets) w.scalar<std::uint32_t>(o);
  for (auto v : g.neighbors) w.scalar<std::uint32_t>(v);
  for (auto t : g.tags) w.scalar<std::uint8_t>(static_cast<std::uint8_t>(t));
  for (Eigen::Index i = 0; i < g.features.size(); ++i) w.scalar<float>(g.features.data()[i]);
  for (auto l : g.labels) w.scalar<std::uint8_t>(l);
  for (auto x : g.onset_group) w.scalar<std::uint32_t>(x);
  for (auto x : g.beat_group) w.scalar<std::uint32_t>(x);

  nlohmann::json trailer;
  trailer["feature_manifest"] = g.manifest.to_json();
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& p : g.pieces) pieces.push_back({{"piece_id", p.piece_id}, {"first", p.first}, {"count", p.count}});
  trailer["pieces"] = pieces;
  trailer["piece_id"] = g.pieces.size() == 1 ? g.pieces.front().piece_id : std::string();
  nlohmann::json onsets = nlohmann::json::array();
  for (const auto& o : g.onsets) onsets.push_back(o.to_string());
  trailer["onsets"] = onsets;
  std::string text = trailer.dump();
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  return w.data();
}

ScoreGraph deserialize_graph(std::string_view bytes) {
  io::Reader r(bytes, "graph file");
  if (r.bytes(4) != "SGGR") throw DataError("graph file: bad magic (expected SGGR)");
  auto version = r.scalar<std::uint16_t>();
  if (version != kGraphFormatVersion)
    throw DataError("graph file: unsupported version " + std::to_string(version));
  ScoreGraph g;
  g.n = r.scalar<std::uint32_t>();
  const auto d = r.scalar<std::uint32_t>();
  const auto m = r.scalar<std::uint32_t>();
  const std::uint64_t nnz = 2ull * m;
  // Cheap size sanity check before allocating.
  const std::uint64_t need = 4ull * (g.n + 1) + 4ull * nnz + nnz + 4ull * g.n * d + g.n + 8ull * g.n + 4;
  if (need > r.remaining()) throw DataError("graph file: truncated file");
  g.offsets.resize(g.n + 1);
  for (auto& o : g.offsets) o = r.scalar<std::uint32_t>();
  g.neighbors.resize(nnz);
  for (auto& v : g.neighbors) {
    v = r.scalar<std::uint32_t>();
    if (v >= g.n) throw DataError("graph file: neighbor id out of range");
  }
  if (g.offsets.front() != 0 || g.offsets.back() != nnz) throw DataError("graph file: inconsistent CSR offsets");
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.offsets[i] > g.offsets[i + 1]) throw DataError("graph file: CSR offsets decrease");
  g.tags.resize(nnz);
  for (auto& t : g.tags) {
    auto raw = r.scalar<std::uint8_t>();
    if (raw > 2) throw DataError("graph file: bad edge tag");
    t = static_cast<EdgeTag>(raw);
  }
  g.features.resize(g.n, d);
  for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = r.scalar<float>();
  g.labels.resize(g.n);
  for (auto& l : g.labels) l = r.scalar<std::uint8_t>();
  g.onset_group.resize(g.n);
  for (auto& x : g.onset_group) x = r.scalar<std::uint32_t>();
  g.beat_group.resize(g.n);
  for (auto& x : g.beat_group) x = r.scalar<std::uint32_t>();
  auto len = r.scalar<std::uint32_t>();
  auto text = r.bytes(len);
  try {
    auto trailer = nlohmann::json::parse(text);
    g.manifest = FeatureManifest::from_json(trailer.at("feature_manifest"));
    for (const auto& p : trailer.at("pieces"))
      g.pieces.push_back({p.at("piece_id").get<std::string>(), p.at("first").get<std::uint32_t>(),
                          p.at("count").get<std::uint32_t>()});
    for (const auto& o : trailer.at("onsets")) g.onsets.push_back(Rational::parse(o.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("graph file: bad JSON trailer: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("graph file: bad onset in trailer: ") + e.what());
  }
  if (g.manifest.size() != d) throw DataError("graph file: manifest width differs from feature width");
  if (g.onsets.size() != g.n) throw DataError("graph file: onset count differs from node count");
  return g;
}

void save_graph(const ScoreGraph& g, const std::string& path) { io::write_file(path, serialize_graph(g)); }

ScoreGraph load_graph(const std::string& path) {
  try {
    return deserialize_graph(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace cadence
