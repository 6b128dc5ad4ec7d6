#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cadence/score.hpp"

namespace cadence {

/// Parses a single-file Humdrum **kern document (supported subset).
///
/// Each **kern spine becomes one voice, numbered left to right; other
/// exclusive interpretations are ignored. Recognized: *M time signatures,
/// *k[...] key signatures, barlines, chords, rests and ties ("[", "_", "]"
/// merge into a single note). A recip value d lasts 4/d quarter notes (0 is
/// a breve), each dot adding half of the previous addition. Spine
/// manipulators (*^ *v *+ *x) raise UnsupportedFeature. Grace notes are
/// dropped with a warning since zero-length nodes are not representable.
///
/// Cadence annotations are not part of **kern; the result has none.
Score parse_kern(std::string_view text, std::string piece_id, std::vector<std::string>* warnings = nullptr);

}  // namespace cadence
