#include "cadence/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cadence {

std::string_view to_string(Level l) {
  switch (l) {
    case Level::note: return "note";
    case Level::onset: return "onset";
    case Level::beat: return "beat";
  }
  return "?";
}

Level parse_level(std::string_view s) {
  if (s == "note") return Level::note;
  if (s == "onset") return Level::onset;
  if (s == "beat") return Level::beat;
  throw std::invalid_argument("unknown evaluation level '" + std::string(s) + "'");
}

std::vector<Level> parse_levels(std::string_view list) {
  std::vector<Level> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    auto item = list.substr(pos, comma - pos);
    if (!item.empty()) {
      Level l = parse_level(item);
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("no evaluation levels given");
  return out;
}

std::vector<std::uint32_t> groups_for(const ScoreGraph& g, Level level) {
  switch (level) {
    case Level::onset: return g.onset_group;
    case Level::beat: return g.beat_group;
    case Level::note: break;
  }
  std::vector<std::uint32_t> ids(g.n);
  std::iota(ids.begin(), ids.end(), 0u);
  return ids;
}

GroupOutcome aggregate(std::span<const int> node_preds, const Tensor2& node_probs, std::span<const int> node_labels,
                       std::span<const std::uint32_t> groups) {
  if (node_preds.size() != groups.size() || node_labels.size() != groups.size())
    throw std::invalid_argument("aggregate: length mismatch");
  const Eigen::Index classes = node_probs.cols();
  if (static_cast<std::size_t>(node_probs.rows()) != groups.size())
    throw std::invalid_argument("aggregate: probability rows mismatch");
  std::uint32_t num_groups = 0;
  for (auto g : groups) num_groups = std::max(num_groups, g + 1);

  std::vector<std::vector<std::int64_t>> pred_votes(num_groups, std::vector<std::int64_t>(classes, 0));
  std::vector<std::vector<std::int64_t>> label_votes(num_groups, std::vector<std::int64_t>(classes, 0));
  Tensor2 prob_sum = Tensor2::Zero(num_groups, classes);
  std::vector<bool> present(num_groups, false);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto g = groups[i];
    present[g] = true;
    ++pred_votes[g][static_cast<std::size_t>(node_preds[i])];
    ++label_votes[g][static_cast<std::size_t>(node_labels[i])];
    prob_sum.row(g) += node_probs.row(static_cast<Eigen::Index>(i));
  }

  GroupOutcome out;
  for (std::uint32_t g = 0; g < num_groups; ++g) {
    if (!present[g]) continue;
    int pred = 0;
    for (Eigen::Index c = 1; c < classes; ++c)
      if (pred_votes[g][c] > 0 && (pred == 0 || prob_sum(g, c) > prob_sum(g, pred))) pred = static_cast<int>(c);
    int label = 0;
    for (Eigen::Index c = 1; c < classes; ++c)
      if (label_votes[g][c] > 0 && (label == 0 || label_votes[g][c] > label_votes[g][label])) label = static_cast<int>(c);
    out.preds.push_back(pred);
    out.labels.push_back(label);
  }
  return out;
}

MetricsReport f1_report(std::span<const int> preds, std::span<const int> labels, int num_classes) {
  if (preds.size() != labels.size()) throw std::invalid_argument("f1_report: length mismatch");
  if (num_classes < 2) throw std::invalid_argument("f1_report: need at least two classes");
  const auto C = static_cast<std::size_t>(num_classes);
  MetricsReport r;
  r.count = static_cast<std::int64_t>(preds.size());
  r.confusion.assign(C, std::vector<std::int64_t>(C, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || labels[i] < 0 || static_cast<std::size_t>(preds[i]) >= C || static_cast<std::size_t>(labels[i]) >= C)
      throw std::invalid_argument("f1_report: class id out of range");
    ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
  }
  r.classes.resize(C);
  double sum = 0;
  for (std::size_t c = 0; c < C; ++c) {
    auto& m = r.classes[c];
    m.tp = r.confusion[c][c];
    for (std::size_t o = 0; o < C; ++o) {
      if (o == c) continue;
      m.fp += r.confusion[o][c];
      m.fn += r.confusion[c][o];
    }
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    sum += m.f1;
  }
  r.macro_f1 = sum / static_cast<double>(C);
  r.headline_f1 = C == 2 ? r.classes[1].f1 : r.macro_f1;
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& m = classes[c];
    per.push_back({{"class", c}, {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn},
                   {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}});
  }
  return {{"count", count}, {"f1", headline_f1}, {"macro_f1", macro_f1}, {"per_class", per}, {"confusion", confusion}};
}

}  // namespace cadence
