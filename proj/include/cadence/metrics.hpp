#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cadence/graph.hpp"
#include "cadence/model.hpp"

namespace cadence {

enum class Level { note, onset, beat };

std::string_view to_string(Level l);
Level parse_level(std::string_view s);
/// Comma-separated, e.g. "note,onset,beat".
std::vector<Level> parse_levels(std::string_view list);

/// Group id of every node at `level` (identity for notes).
std::vector<std::uint32_t> groups_for(const ScoreGraph& g, Level level);

struct GroupOutcome {
  std::vector<int> preds;
  std::vector<int> labels;
};

/// A group is predicted class c != 0 iff some member is; several nonzero
/// classes are resolved by the highest probability summed over the members.
/// Its label is the most frequent nonzero member label (0 when none). Empty
/// group ids are skipped.
GroupOutcome aggregate(std::span<const int> node_preds, const Tensor2& node_probs, std::span<const int> node_labels,
                       std::span<const std::uint32_t> groups);

struct ClassMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][pred]
  double macro_f1 = 0;
  /// Positive-class F1 for binary schemes, macro-F1 otherwise.
  double headline_f1 = 0;
  std::int64_t count = 0;

  nlohmann::json to_json() const;
};

MetricsReport f1_report(std::span<const int> preds, std::span<const int> labels, int num_classes);

}  // namespace cadence
