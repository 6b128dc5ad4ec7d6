#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cadence/rational.hpp"

namespace cadence {

/// A note or rest. Onset and duration are in quarter notes from the piece start.
struct NoteEvent {
  std::uint32_t id = 0;
  Rational onset;
  Rational duration;
  std::optional<int> midi_pitch;  // empty for rests
  int voice = 0;
  bool is_rest = false;

  Rational offset() const { return onset + duration; }
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct TimeSignature {
  Rational onset;
  int numerator = 4;
  int denominator = 4;

  Rational measure_length() const { return Rational(numerator * 4, denominator); }
  Rational beat_length() const { return Rational(4, denominator); }
  friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

struct KeySignature {
  Rational onset;
  int fifths = 0;  // -7..7, negative = flats
  friend bool operator==(const KeySignature&, const KeySignature&) = default;
};

enum class CadenceType : std::uint8_t { PAC, rIAC, HC };

std::string_view to_string(CadenceType t);
/// Case-insensitive; throws DataError on unknown names.
CadenceType parse_cadence_type(std::string_view name);

struct CadenceAnnotation {
  Rational beat_onset;
  CadenceType type = CadenceType::PAC;
  friend bool operator==(const CadenceAnnotation&, const CadenceAnnotation&) = default;
};

/// An immutable symbolic score. Notes are sorted by (onset, pitch) with rests
/// ordered before pitched notes at the same onset, then by voice; ids are the
/// positions in that order.
class Score {
 public:
  Score() = default;
  /// Sorts and validates. Throws DataError when a time signature at onset 0 is
  /// missing, a duration is not positive, or a pitch is out of range.
  Score(std::string piece_id, std::vector<NoteEvent> notes, std::vector<TimeSignature> time_signatures,
        std::vector<KeySignature> key_signatures, std::vector<CadenceAnnotation> annotations);

  const std::string& piece_id() const noexcept { return piece_id_; }
  const std::vector<NoteEvent>& notes() const noexcept { return notes_; }
  const std::vector<TimeSignature>& time_signatures() const noexcept { return time_sigs_; }
  const std::vector<KeySignature>& key_signatures() const noexcept { return key_sigs_; }
  const std::vector<CadenceAnnotation>& annotations() const noexcept { return annotations_; }
  std::size_t size() const noexcept { return notes_.size(); }

  const TimeSignature& time_signature_at(const Rational& onset) const;
  /// Key signature in effect at `onset`; 0 fifths when none was declared yet.
  int key_fifths_at(const Rational& onset) const;

  friend bool operator==(const Score&, const Score&) = default;

 private:
  std::string piece_id_;
  std::vector<NoteEvent> notes_;
  std::vector<TimeSignature> time_sigs_;
  std::vector<KeySignature> key_sigs_;
  std::vector<CadenceAnnotation> annotations_;
};

// ---------------------------------------------------------------------------
// Note-Table format: a TSV body with header
//   onset  duration  midi_pitch  voice  is_rest
// plus a JSON sidecar with time_signatures, key_signatures and cadences.
// Rationals are written as "a/b" or as plain integers.

/// Parses a TSV note table together with its meta sidecar.
Score parse_note_table(std::string_view tsv, const nlohmann::json& meta, std::string piece_id);
/// Parses the single-document JSON form: the meta object with an extra
/// "notes" array of {onset, duration, midi_pitch, voice, is_rest}.
Score parse_note_table_json(const nlohmann::json& doc, std::string piece_id);

/// The "cadences" array of a meta document (empty when absent).
std::vector<CadenceAnnotation> parse_cadence_list(const nlohmann::json& meta);

/// Same score with its annotations replaced.
Score with_annotations(const Score& score, std::vector<CadenceAnnotation> annotations);

std::string write_note_table_tsv(const Score& score);
nlohmann::json write_note_table_meta(const Score& score);

// ---------------------------------------------------------------------------

struct BeatInfo {
  int measure = 1;  // 1-based
  int beat = 0;     // 0-based within the measure
  Rational beat_start;
  Rational beat_length;
  Rational measure_start;
  Rational measure_length;

  friend bool operator==(const BeatInfo&, const BeatInfo&) = default;
};

/// Metrical position of `onset`. Measure 1 starts at onset 0 (no anacrusis);
/// a time-signature change always starts a new measure. Throws DataError for
/// negative onsets.
BeatInfo beat_of(const Score& score, const Rational& onset);

/// Which cadence types become positive classes. Label 0 is "no cadence";
/// positive[i] maps to label i + 1. A single entry gives a binary scheme.
struct LabelScheme {
  std::vector<CadenceType> positive{CadenceType::PAC};

  int num_classes() const noexcept { return static_cast<int>(positive.size()) + 1; }
  bool binary() const noexcept { return positive.size() == 1; }
  /// 0 when `t` is not part of the scheme.
  int label_of(CadenceType t) const noexcept;

  static LabelScheme binary_for(CadenceType t) { return LabelScheme{{t}}; }
  static LabelScheme multiclass(std::vector<CadenceType> classes) { return LabelScheme{std::move(classes)}; }
  /// Comma-separated cadence names, e.g. "PAC" or "PAC,HC".
  static LabelScheme parse(std::string_view list);
  std::string to_string() const;
};

struct Labeling {
  std::vector<int> labels;
  std::vector<std::string> warnings;
};

/// Labels every node (rests included) whose onset lies in an annotated
/// arrival beat. Annotations off a beat start are snapped to the enclosing
/// beat with a warning. When two classes claim the same beat the earlier one
/// in the scheme wins.
Labeling assign_labels(const Score& score, const LabelScheme& scheme);

}  // namespace cadence
