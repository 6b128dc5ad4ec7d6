#include "cadence/synthetic.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "cadence/random.hpp"

namespace cadence {

namespace {

// Bass, tenor, alto, soprano in C major.
using Voicing = std::array<int, 4>;
constexpr std::array<Voicing, 5> kFiller{{
    {48, 55, 64, 72},  // I
    {50, 57, 65, 74},  // ii
    {52, 59, 67, 71},  // iii
    {53, 57, 65, 72},  // IV
    {45, 57, 64, 72},  // vi
}};
constexpr Voicing kDominant{43, 59, 67, 74};         // V, soprano on the second degree
constexpr Voicing kDominantLeap{43, 59, 62, 67};     // V, soprano leaps up to the tonic
constexpr Voicing kDominantFirstInv{47, 55, 62, 74}; // V6, bass rises by step
constexpr Voicing kTonic{48, 55, 64, 72};
constexpr Voicing kTonicNoFifth{48, 60, 64, 72};

struct Writer {
  std::vector<NoteEvent> notes;
  int transpose = 0;

  void chord(const Voicing& v, Rational onset, Rational dur) {
    for (int voice = 0; voice < 4; ++voice) {
      NoteEvent e;
      e.onset = onset;
      e.duration = dur;
      e.midi_pitch = v[static_cast<std::size_t>(voice)] + transpose;
      e.voice = voice;
      notes.push_back(e);
    }
  }
};

/// Fills one measure starting at `start` with filler chords.
void filler_measure(Writer& w, Random& rng, Rational start, int beats) {
  int beat = 0;
  while (beat < beats) {
    int len = (beats - beat >= 2 && rng.unit() < 0.25) ? 2 : 1;
    w.chord(kFiller[rng.index(kFiller.size())], start + Rational(beat), Rational(len));
    beat += len;
  }
}

}  // namespace

SynthMode parse_synth_mode(std::string_view s) {
  if (s == "local") return SynthMode::local;
  if (s == "context") return SynthMode::context;
  throw std::invalid_argument("unknown synthetic mode '" + std::string(s) + "' (expected local or context)");
}

std::string_view to_string(SynthMode m) { return m == SynthMode::local ? "local" : "context"; }

Score synthetic_piece(std::string piece_id, const SynthOptions& opts, std::uint64_t seed) {
  if (opts.measures < 4 || opts.gap_min < 1 || opts.gap_max < opts.gap_min)
    throw std::invalid_argument("synthetic piece options out of range");
  Random rng(seed);
  const int fifths = static_cast<int>(rng.index(3)) - 1;
  Writer w;
  w.transpose = ((7 * fifths) % 12 + 12) % 12;
  if (w.transpose > 5) w.transpose -= 12;

  std::vector<CadenceAnnotation> cadences;
  int measure = 0;
  auto at = [](int m, int beat) { return Rational(4 * m + beat); };
  while (measure < opts.measures) {
    const int gap = opts.gap_min + static_cast<int>(rng.index(static_cast<std::size_t>(opts.gap_max - opts.gap_min + 1)));
    for (int g = 0; g < gap && measure < opts.measures; ++g, ++measure) filler_measure(w, rng, at(measure, 0), 4);
    if (measure + 2 > opts.measures) break;

    // Cadence slot: two filler beats, the approach on beats 3-4, arrival on the next downbeat.
    filler_measure(w, rng, at(measure, 0), 2);
    const bool positive = rng.unit() < opts.positive_share;
    const Rational arrival = at(measure + 1, 0);
    if (opts.mode == SynthMode::local) {
      Voicing approach = kDominant;
      Voicing goal = kTonic;
      if (!positive) {
        switch (rng.index(3)) {
          case 0: approach = kDominantFirstInv; break;
          case 1: approach = kDominantLeap; break;
          default: goal = kTonicNoFifth; break;
        }
      }
      w.chord(approach, at(measure, 2), Rational(2));
      w.chord(goal, arrival, Rational(4));
    } else {
      if (positive) {
        w.chord(kDominant, at(measure, 2), Rational(2));
      } else {
        w.chord(kFiller[1 + rng.index(kFiller.size() - 1)], at(measure, 2), Rational(1));
        w.chord(kDominant, at(measure, 3), Rational(1));
      }
      w.chord(kTonic, arrival, Rational(4));
    }
    if (positive) cadences.push_back({arrival, CadenceType::PAC});
    measure += 2;
  }
  return Score(std::move(piece_id), std::move(w.notes), {TimeSignature{Rational(0), 4, 4}},
               {KeySignature{Rational(0), fifths}}, std::move(cadences));
}

std::vector<Score> synthetic_corpus(int count, const SynthOptions& opts, std::uint64_t seed, std::string_view prefix) {
  Random rng(seed);
  std::vector<Score> out;
  for (int i = 0; i < count; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%02d", i + 1);
    out.push_back(synthetic_piece(std::string(prefix) + name, opts, rng.fork()));
  }
  return out;
}

}  // namespace cadence
