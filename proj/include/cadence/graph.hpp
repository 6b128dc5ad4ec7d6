#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cadence/manifest.hpp"
#include "cadence/rational.hpp"
#include "cadence/score.hpp"

namespace cadence {

enum class EdgeTag : std::uint8_t { ON = 0, CONS = 1, DUR = 2 };

/// Undirected edge stored with i < j.
struct Edge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  EdgeTag tag = EdgeTag::ON;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct EdgeList {
  std::vector<Edge> pairs;  // sorted by (i, j)
  std::size_t count(EdgeTag t) const;
};

/// Temporal edges between notes/rests, compared exactly:
///   ON   on(i) == on(j)
///   CONS on(i) + dur(i) == on(j)
///   DUR  on(i) < on(j) < on(i) + dur(i)
/// A pair is stored once; tag priority ON > CONS > DUR.
EdgeList build_edges(const Score& score);

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A contiguous node range belonging to one piece.
struct PieceSpan {
  std::string piece_id;
  std::uint32_t first = 0;
  std::uint32_t count = 0;
  friend bool operator==(const PieceSpan&, const PieceSpan&) = default;
};

/// Homogeneous note graph in CSR form with both edge directions stored and
/// neighbor lists sorted ascending. A graph built from one score has a single
/// PieceSpan; disjoint unions carry one span per piece.
struct ScoreGraph {
  std::uint32_t n = 0;
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> neighbors;
  std::vector<EdgeTag> tags;
  FeatureMatrix features;
  FeatureManifest manifest;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> onset_group;
  std::vector<std::uint32_t> beat_group;
  std::vector<Rational> onsets;
  std::vector<PieceSpan> pieces;

  std::size_t num_edges() const noexcept { return neighbors.size() / 2; }
  std::uint32_t degree(std::uint32_t v) const noexcept { return offsets[v + 1] - offsets[v]; }
  std::span<const std::uint32_t> neighbors_of(std::uint32_t v) const noexcept {
    return {neighbors.data() + offsets[v], neighbors.data() + offsets[v + 1]};
  }
  /// Piece id of a single-piece graph ("" for an empty union).
  const std::string& piece_id() const;
  /// Index into `pieces` of node v.
  std::size_t piece_of(std::uint32_t v) const;

  friend bool operator==(const ScoreGraph&, const ScoreGraph&) = default;
};

/// Symmetric CSR plus onset/beat groups. Throws DataError when feature rows,
/// label count or edge ids disagree with the score.
ScoreGraph to_graph(const Score& score, const EdgeList& edges, FeatureMatrix features, FeatureManifest manifest,
                    std::vector<int> labels);

/// Adjacency-only CSR (no features, labels or groups), used before features exist.
ScoreGraph adjacency_only(std::uint32_t n, const EdgeList& edges);

/// Concatenates graphs without inter-piece edges. Group ids are offset so
/// they stay unique. Manifests must match.
ScoreGraph disjoint_union(std::span<const ScoreGraph> graphs);

/// Binary graph file: "SGGR", u16 version, u32 n, d, edge count, CSR arrays,
/// tags (u8), features (f32 row-major), labels (u8), onset/beat groups (u32),
/// then a u32-length JSON trailer (manifest, piece id, onsets).
std::string serialize_graph(const ScoreGraph& g);
ScoreGraph deserialize_graph(std::string_view bytes);
void save_graph(const ScoreGraph& g, const std::string& path);
ScoreGraph load_graph(const std::string& path);

inline constexpr std::uint16_t kGraphFormatVersion = 1;

}  // namespace cadence
