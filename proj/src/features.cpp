#include "cadence/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cadence/error.hpp"

namespace cadence {

namespace {

const std::array<PitchClassSet, 9>& chord_templates() {
  static const std::array<PitchClassSet, 9> t{
      make_pcset({0, 4, 7}),     make_pcset({0, 3, 7}),     make_pcset({0, 3, 6}),
      make_pcset({0, 4, 8}),     make_pcset({0, 4, 7, 10}), make_pcset({0, 4, 7, 11}),
      make_pcset({0, 3, 7, 10}), make_pcset({0, 3, 6, 10}), make_pcset({0, 3, 6, 9}),
  };
  return t;
}

int mod12(int x) { return ((x % 12) + 12) % 12; }

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

PitchClassSet rotate(const PitchClassSet& s, int t) {
  PitchClassSet out;
  for (int pc = 0; pc < 12; ++pc)
    if (s[pc]) out.set(mod12(pc + t));
  return out;
}

}  // namespace

PitchClassSet make_pcset(std::initializer_list<int> pcs) {
  PitchClassSet s;
  for (int pc : pcs) s.set(mod12(pc));
  return s;
}

std::array<int, 6> interval_vector(const PitchClassSet& pcs) {
  std::array<int, 6> iv{};
  for (int a = 0; a < 12; ++a) {
    if (!pcs[a]) continue;
    for (int b = a + 1; b < 12; ++b) {
      if (!pcs[b]) continue;
      int d = b - a;
      iv[std::min(d, 12 - d) - 1] += 1;
    }
  }
  return iv;
}

std::array<bool, 9> chord_template_flags(const PitchClassSet& pcs) {
  std::array<bool, 9> flags{};
  for (std::size_t k = 0; k < chord_templates().size(); ++k) {
    const PitchClassSet& tpl = chord_templates()[k];
    if (tpl.count() != pcs.count()) continue;
    for (int t = 0; t < 12 && !flags[k]; ++t) flags[k] = rotate(tpl, t) == pcs;
  }
  return flags;
}

std::vector<OnsetSlice> onset_slices(const Score& score) {
  const auto& notes = score.notes();
  std::vector<OnsetSlice> slices;
  std::vector<std::uint32_t> active;  // pitched notes that may still sound
  std::size_t i = 0;
  while (i < notes.size()) {
    OnsetSlice s;
    s.onset = notes[i].onset;
    for (; i < notes.size() && notes[i].onset == s.onset; ++i) {
      s.starting.push_back(notes[i].id);
      if (!notes[i].is_rest) active.push_back(notes[i].id);
    }
    std::erase_if(active, [&](std::uint32_t id) { return notes[id].offset() <= s.onset; });
    s.sounding = active;
    std::sort(s.sounding.begin(), s.sounding.end());
    for (auto id : s.sounding) {
      int p = *notes[id].midi_pitch;
      s.pcset.set(mod12(p));
      s.lowest = s.lowest ? std::min(*s.lowest, p) : p;
      s.highest = s.highest ? std::max(*s.highest, p) : p;
    }
    slices.push_back(std::move(s));
  }
  return slices;
}

// ---------------------------------------------------------------------------

FeatureBlock general_features(const Score& score) {
  const auto& notes = score.notes();
  const auto n = static_cast<Eigen::Index>(notes.size());
  FeatureBlock fb;
  auto& m = fb.manifest;
  using C = FeatureCategory;
  m.add("onset_position", C::GENERAL, 0, 1);
  m.add("duration_beats", C::GENERAL, 0, 1);
  m.add("midi_pitch", C::GENERAL, 0, 1);
  for (int pc = 0; pc < 12; ++pc) m.add("pitch_class_" + std::to_string(pc), C::GENERAL, 0, 1);
  m.add("beat_position", C::GENERAL, 0, 1);
  m.add("is_downbeat", C::GENERAL, 0, 1);
  for (const char* s : {"2", "3", "4", "6", "9", "12", "other"}) m.add(std::string("ts_num_") + s, C::GENERAL, 0, 1);
  for (const char* s : {"2", "4", "8", "other"}) m.add(std::string("ts_den_") + s, C::GENERAL, 0, 1);
  m.add("is_rest", C::GENERAL, 0, 1);
  m.add("voice", C::GENERAL, 0, 1);
  m.add("polyphony", C::GENERAL, 0, 1);
  m.add("key_fifths", C::GENERAL, -1, 1);
  m.add("melodic_interval", C::GENERAL, -1, 1);
  m.add("has_prev_in_voice", C::GENERAL, 0, 1);
  m.add("is_step", C::GENERAL, 0, 1);
  m.add("is_leap", C::GENERAL, 0, 1);
  for (int ic = 1; ic <= 6; ++ic) m.add("interval_class_" + std::to_string(ic), C::GENERAL, 0, 1);
  for (auto name : kChordTemplateNames) m.add("chord_" + std::string(name), C::GENERAL, 0, 1);

  fb.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m.size()));
  if (n == 0) return fb;

  Rational end(0);
  for (const auto& note : notes) end = std::max(end, note.offset());

  auto slices = onset_slices(score);
  std::vector<std::size_t> slice_of(notes.size());
  for (std::size_t s = 0; s < slices.size(); ++s)
    for (auto id : slices[s].starting) slice_of[id] = s;

  // Per voice: distinct onsets of pitched notes with the highest pitch there.
  std::map<int, std::vector<std::pair<Rational, int>>> voice_line;
  for (const auto& note : notes) {
    if (note.is_rest) continue;
    auto& line = voice_line[note.voice];
    if (!line.empty() && line.back().first == note.onset)
      line.back().second = std::max(line.back().second, *note.midi_pitch);
    else
      line.push_back({note.onset, *note.midi_pitch});
  }

  static constexpr std::array<int, 6> kNums{2, 3, 4, 6, 9, 12};
  static constexpr std::array<int, 3> kDens{2, 4, 8};
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& note = notes[static_cast<std::size_t>(r)];
    const auto& slice = slices[slice_of[note.id]];
    auto row = fb.values.row(r);
    BeatInfo bi = beat_of(score, note.onset);
    const auto& ts = score.time_signature_at(note.onset);
    int c = 0;
    row(c++) = (note.onset / end).to_double();
    row(c++) = clip((note.duration / bi.beat_length).to_double(), 0, 4) / 4.0;
    row(c++) = note.is_rest ? 0.0 : *note.midi_pitch / 127.0;
    if (!note.is_rest) row(c + mod12(*note.midi_pitch)) = 1.0;
    c += 12;
    row(c++) = ((note.onset - bi.measure_start) / bi.measure_length).to_double();
    row(c++) = note.onset == bi.measure_start ? 1.0 : 0.0;
    {
      auto it = std::find(kNums.begin(), kNums.end(), ts.numerator);
      row(c + (it == kNums.end() ? 6 : static_cast<int>(it - kNums.begin()))) = 1.0;
      c += 7;
      auto jt = std::find(kDens.begin(), kDens.end(), ts.denominator);
      row(c + (jt == kDens.end() ? 3 : static_cast<int>(jt - kDens.begin()))) = 1.0;
      c += 4;
    }
    row(c++) = note.is_rest ? 1.0 : 0.0;
    row(c++) = clip(note.voice, 0, 16) / 16.0;
    row(c++) = clip(static_cast<double>(slice.sounding.size()), 0, 8) / 8.0;
    row(c++) = score.key_fifths_at(note.onset) / 7.0;
    if (!note.is_rest) {
      const auto& line = voice_line[note.voice];
      auto it = std::lower_bound(line.begin(), line.end(), note.onset,
                                 [](const auto& e, const Rational& t) { return e.first < t; });
      if (it != line.begin()) {
        int delta = *note.midi_pitch - std::prev(it)->second;
        row(c) = clip(delta, -12, 12) / 12.0;
        row(c + 1) = 1.0;
        row(c + 2) = (std::abs(delta) == 1 || std::abs(delta) == 2) ? 1.0 : 0.0;
        row(c + 3) = std::abs(delta) > 2 ? 1.0 : 0.0;
      }
    }
    c += 4;
    auto iv = interval_vector(slice.pcset);
    for (int k = 0; k < 6; ++k) row(c++) = clip(iv[k], 0, 4) / 4.0;
    auto flags = chord_template_flags(slice.pcset);
    for (int k = 0; k < 9; ++k) row(c++) = flags[k] ? 1.0 : 0.0;
  }
  return fb;
}

FeatureBlock cadence_local_features(const Score& score) {
  const auto& notes = score.notes();
  const auto n = static_cast<Eigen::Index>(notes.size());
  FeatureBlock fb;
  auto& m = fb.manifest;
  using C = FeatureCategory;
  for (const char* name : {"is_lowest_at_onset", "is_highest_at_onset", "bass_fifth_motion", "bass_step_motion",
                           "soprano_desc_step", "leading_tone_resolution", "dissonance_prev"})
    m.add(name, C::CADENCE_LOCAL, 0, 1);
  m.add("voice_count_delta", C::CADENCE_LOCAL, -1, 1);
  m.add("rest_follows_in_voice", C::CADENCE_LOCAL, 0, 1);
  for (const char* name : {"metric_downbeat", "metric_on_beat", "metric_off_beat"}) m.add(name, C::CADENCE_LOCAL, 0, 1);

  fb.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m.size()));
  if (n == 0) return fb;

  auto slices = onset_slices(score);
  std::vector<std::size_t> slice_of(notes.size());
  for (std::size_t s = 0; s < slices.size(); ++s)
    for (auto id : slices[s].starting) slice_of[id] = s;

  // Per voice: distinct onsets and whether any event there is a rest.
  std::map<int, std::vector<std::pair<Rational, bool>>> voice_events;
  for (const auto& note : notes) {
    auto& ev = voice_events[note.voice];
    if (!ev.empty() && ev.back().first == note.onset)
      ev.back().second = ev.back().second || note.is_rest;
    else
      ev.push_back({note.onset, note.is_rest});
  }

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& note = notes[static_cast<std::size_t>(r)];
    const std::size_t si = slice_of[note.id];
    const auto& cur = slices[si];
    const OnsetSlice* prev = si > 0 ? &slices[si - 1] : nullptr;
    auto row = fb.values.row(r);

    if (!note.is_rest) {
      row(0) = cur.lowest && *note.midi_pitch == *cur.lowest ? 1.0 : 0.0;
      row(1) = cur.highest && *note.midi_pitch == *cur.highest ? 1.0 : 0.0;
    }
    if (prev) {
      if (prev->lowest && cur.lowest) {
        int d = *cur.lowest - *prev->lowest;
        row(2) = mod12(d) == 5 ? 1.0 : 0.0;
        row(3) = (std::abs(d) == 1 || std::abs(d) == 2) ? 1.0 : 0.0;
      }
      if (prev->highest && cur.highest) {
        int d = *cur.highest - *prev->highest;
        row(4) = (d == -1 || d == -2) ? 1.0 : 0.0;
      }
      if (!note.is_rest) {
        const int tonic = mod12(7 * score.key_fifths_at(note.onset));
        const int pc = mod12(*note.midi_pitch);
        const int minor_tonic = mod12(tonic + 9);
        bool major_res = pc == tonic && prev->pcset[mod12(tonic - 1)];
        bool minor_res = pc == minor_tonic && prev->pcset[mod12(minor_tonic - 1)];
        row(5) = (major_res || minor_res) ? 1.0 : 0.0;
      }
      auto iv = interval_vector(prev->pcset);
      row(6) = iv[0] + iv[1] > 0 ? 1.0 : 0.0;
      double delta = static_cast<double>(cur.sounding.size()) - static_cast<double>(prev->sounding.size());
      row(7) = clip(delta / 4.0, -1, 1);
    }
    {
      const auto& ev = voice_events[note.voice];
      auto it = std::upper_bound(ev.begin(), ev.end(), note.onset,
                                 [](const Rational& t, const auto& e) { return t < e.first; });
      row(8) = (it != ev.end() && it->second) ? 1.0 : 0.0;
    }
    BeatInfo bi = beat_of(score, note.onset);
    if (note.onset == bi.measure_start)
      row(9) = 1.0;
    else if (note.onset == bi.beat_start)
      row(10) = 1.0;
    else
      row(11) = 1.0;
  }
  return fb;
}

// ---------------------------------------------------------------------------

FeatureSet parse_feature_set(std::string_view s) {
  if (s == "all") return FeatureSet::all;
  if (s == "general") return FeatureSet::general;
  throw DataError("unknown feature set '" + std::string(s) + "' (expected all or general)");
}

std::string_view to_string(FeatureSet s) { return s == FeatureSet::all ? "all" : "general"; }

std::pair<FeatureMatrix, FeatureManifest> assemble(const FeatureBlock& general, const FeatureBlock& spectral,
                                                   const FeatureBlock* cadence_local) {
  std::vector<const FeatureBlock*> blocks{&general, &spectral};
  if (cadence_local) blocks.push_back(cadence_local);
  const Eigen::Index rows = general.values.rows();
  FeatureManifest manifest;
  Eigen::Index width = 0;
  for (const auto* b : blocks) {
    if (b->values.rows() != rows) throw DataError("feature blocks have different row counts");
    if (static_cast<std::size_t>(b->values.cols()) != b->manifest.size())
      throw DataError("feature block width does not match its manifest");
    manifest.append(b->manifest);
    width += b->values.cols();
  }
  FeatureMatrix out(rows, width);
  Eigen::Index col = 0;
  for (const auto* b : blocks) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < b->values.cols(); ++c) {
        double v = b->values(r, c);
        if (!std::isfinite(v))
          throw NumericError("non-finite value in feature '" + manifest.entries[col + c].name + "' at node " +
                             std::to_string(r));
        out(r, col + c) = static_cast<float>(v);
      }
    }
    col += b->values.cols();
  }
  return {std::move(out), std::move(manifest)};
}

ScoreGraph build_score_graph(const Score& score, const LabelScheme& scheme, FeatureSet set,
                             std::vector<std::string>* warnings) {
  EdgeList edges = build_edges(score);
  ScoreGraph adj = adjacency_only(static_cast<std::uint32_t>(score.size()), edges);
  SpectralOptions opts;
  opts.piece_id = score.piece_id();
  FeatureBlock spectral = spectral_features(adj, opts);
  FeatureBlock general = general_features(score);
  std::optional<FeatureBlock> local;
  if (set == FeatureSet::all) local = cadence_local_features(score);
  auto [features, manifest] = assemble(general, spectral, local ? &*local : nullptr);
  Labeling lab = assign_labels(score, scheme);
  if (warnings) warnings->insert(warnings->end(), lab.warnings.begin(), lab.warnings.end());
  return to_graph(score, edges, std::move(features), std::move(manifest), std::move(lab.labels));
}

}  // namespace cadence
