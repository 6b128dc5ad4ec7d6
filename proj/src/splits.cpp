#include "cadence/splits.hpp"

#include <cmath>
#include <stdexcept>

#include "cadence/error.hpp"
#include "cadence/random.hpp"

namespace cadence {

SplitMode parse_split_mode(std::string_view s) {
  if (s == "fixed-list" || s == "fixed_list") return SplitMode::fixed_list;
  if (s == "random-half" || s == "random_half") return SplitMode::random_half;
  if (s == "kfold") return SplitMode::kfold;
  throw std::invalid_argument("unknown split mode '" + std::string(s) + "'");
}

std::vector<Split> make_splits(const std::vector<std::string>& pieces, SplitMode mode, std::uint64_t seed, int folds) {
  const std::size_t n = pieces.size();
  if (n < 2) throw DataError("need at least two pieces to split, got " + std::to_string(n));
  std::vector<std::string> order = pieces;
  if (mode != SplitMode::fixed_list) {
    Random rng(seed);
    rng.shuffle(order.begin(), order.end());
  }
  if (mode != SplitMode::kfold) {
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
    return {s};
  }

  if (folds < 2) throw std::invalid_argument("kfold needs at least two folds");
  const auto k = static_cast<std::size_t>(folds);
  if (n < k) throw DataError("kfold(" + std::to_string(k) + ") needs at least as many pieces, got " + std::to_string(n));
  std::vector<std::size_t> bounds{0};
  for (std::size_t f = 0; f < k; ++f) bounds.push_back(bounds.back() + n / k + (f < n % k ? 1 : 0));
  const std::size_t val_count = std::min<std::size_t>(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)))),
      n - (bounds[1] - bounds[0]) - 1);

  std::vector<Split> out;
  for (std::size_t f = 0; f < k; ++f) {
    Split s;
    std::vector<bool> used(n, false);
    for (std::size_t i = bounds[f]; i < bounds[f + 1]; ++i) {
      s.test.push_back(order[i]);
      used[i] = true;
    }
    for (std::size_t step = 0, i = bounds[f + 1] % n; s.val.size() < val_count && step < n; ++step, i = (i + 1) % n) {
      if (used[i]) continue;
      s.val.push_back(order[i]);
      used[i] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i]) s.train.push_back(order[i]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cadence
