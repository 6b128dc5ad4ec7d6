#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cadence {

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

enum class SplitMode { fixed_list, random_half, kfold };

SplitMode parse_split_mode(std::string_view s);

/// Piece-level partitions.
///   fixed_list:  first half (given order) trains, second half tests
///   random_half: the same after a seeded shuffle
///   kfold:       `folds` splits of a seeded shuffle; fold i tests on the i-th
///                chunk, validates on about a tenth of the pieces taken after
///                it, and trains on the rest
/// Throws DataError for fewer than two pieces (or fewer pieces than folds).
std::vector<Split> make_splits(const std::vector<std::string>& pieces, SplitMode mode, std::uint64_t seed,
                               int folds = 5);

}  // namespace cadence
