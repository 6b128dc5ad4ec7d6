#pragma once

// Generated four-voice chorale-like pieces in 4/4 with planted authentic
// cadences, for checking that the pipeline can learn a known motif.

#include <cstdint>
#include <string_view>
#include <vector>

#include "cadence/score.hpp"

namespace cadence {

enum class SynthMode {
  /// Cadences are distinguishable from look-alikes by the arrival onset and
  /// the onset right before it (bass, soprano and chord content).
  local,
  /// Cadences and decoys share every pitch of the dominant and the arrival;
  /// only the dominant's length and metric placement differ, which the
  /// arrival notes see only through their neighbors.
  context,
};

SynthMode parse_synth_mode(std::string_view s);
std::string_view to_string(SynthMode m);

struct SynthOptions {
  SynthMode mode = SynthMode::local;
  int measures = 48;
  /// Measures of filler between cadence slots are drawn from [gap_min, gap_max].
  int gap_min = 3;
  int gap_max = 6;
  /// Probability that a slot holds a real cadence rather than a look-alike.
  double positive_share = 0.4;
};

/// One piece. Annotations mark the arrival downbeat of each planted PAC.
Score synthetic_piece(std::string piece_id, const SynthOptions& opts, std::uint64_t seed);

/// `count` pieces named "<prefix>NN", each seeded from `seed`.
std::vector<Score> synthetic_corpus(int count, const SynthOptions& opts, std::uint64_t seed,
                                    std::string_view prefix = "synth");

}  // namespace cadence
