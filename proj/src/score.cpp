#include "cadence/score.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "cadence/error.hpp"

namespace cadence {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

Rational json_rational(const nlohmann::json& v, const char* what) {
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  if (v.is_string()) {
    try {
      return Rational::parse(trim(v.get_ref<const std::string&>()));
    } catch (const std::exception& e) {
      throw DataError(std::string(what) + ": " + e.what());
    }
  }
  throw DataError(std::string(what) + ": expected an integer or an \"a/b\" string");
}

nlohmann::json rational_json(const Rational& r) {
  if (r.is_integer()) return r.num();
  return r.to_string();
}

void read_meta(const nlohmann::json& meta, std::vector<TimeSignature>& ts, std::vector<KeySignature>& ks,
               std::vector<CadenceAnnotation>& ann) {
  if (!meta.is_object()) throw DataError("meta: expected a JSON object");
  try {
    if (meta.contains("time_signatures")) {
      for (const auto& t : meta.at("time_signatures"))
        ts.push_back({json_rational(t.at("onset"), "time signature onset"), t.at("num").get<int>(),
                      t.at("den").get<int>()});
    }
    if (meta.contains("key_signatures")) {
      for (const auto& k : meta.at("key_signatures"))
        ks.push_back({json_rational(k.at("onset"), "key signature onset"), k.at("fifths").get<int>()});
    }
    if (meta.contains("cadences")) {
      for (const auto& c : meta.at("cadences"))
        ann.push_back({json_rational(c.at("onset"), "cadence onset"),
                       parse_cadence_type(c.at("type").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("meta: ") + e.what());
  }
}

bool parse_bool(std::string_view s, std::size_t line) {
  auto l = lower(trim(s));
  if (l == "1" || l == "true") return true;
  if (l == "0" || l == "false") return false;
  throw ParseError("is_rest must be 0/1/true/false, got '" + std::string(s) + "'", line);
}

}  // namespace

std::string_view to_string(CadenceType t) {
  switch (t) {
    case CadenceType::PAC: return "PAC";
    case CadenceType::rIAC: return "rIAC";
    case CadenceType::HC: return "HC";
  }
  return "?";
}

CadenceType parse_cadence_type(std::string_view name) {
  auto l = lower(trim(name));
  if (l == "pac") return CadenceType::PAC;
  if (l == "riac") return CadenceType::rIAC;
  if (l == "hc") return CadenceType::HC;
  throw DataError("unknown cadence type '" + std::string(name) + "'");
}

Score::Score(std::string piece_id, std::vector<NoteEvent> notes, std::vector<TimeSignature> time_signatures,
             std::vector<KeySignature> key_signatures, std::vector<CadenceAnnotation> annotations)
    : piece_id_(std::move(piece_id)),
      notes_(std::move(notes)),
      time_sigs_(std::move(time_signatures)),
      key_sigs_(std::move(key_signatures)),
      annotations_(std::move(annotations)) {
  for (const auto& n : notes_) {
    if (n.duration <= Rational(0))
      throw DataError(piece_id_ + ": note duration must be positive, got " + n.duration.to_string());
    if (n.onset < Rational(0)) throw DataError(piece_id_ + ": negative onset " + n.onset.to_string());
    if (n.is_rest == n.midi_pitch.has_value())
      throw DataError(piece_id_ + ": midi pitch must be present exactly for non-rest events");
    if (n.midi_pitch && (*n.midi_pitch < 0 || *n.midi_pitch > 127))
      throw DataError(piece_id_ + ": midi pitch out of range: " + std::to_string(*n.midi_pitch));
    if (n.voice < 0) throw DataError(piece_id_ + ": negative voice index");
  }
  std::stable_sort(notes_.begin(), notes_.end(), [](const NoteEvent& a, const NoteEvent& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    int pa = a.midi_pitch.value_or(-1), pb = b.midi_pitch.value_or(-1);
    if (pa != pb) return pa < pb;
    if (a.voice != b.voice) return a.voice < b.voice;
    return a.duration < b.duration;
  });
  for (std::size_t i = 0; i < notes_.size(); ++i) notes_[i].id = static_cast<std::uint32_t>(i);

  auto by_onset = [](const auto& a, const auto& b) { return a.onset < b.onset; };
  std::stable_sort(time_sigs_.begin(), time_sigs_.end(), by_onset);
  std::stable_sort(key_sigs_.begin(), key_sigs_.end(), by_onset);
  std::stable_sort(annotations_.begin(), annotations_.end(),
                   [](const auto& a, const auto& b) { return a.beat_onset < b.beat_onset; });

  if (time_sigs_.empty() || time_sigs_.front().onset != Rational(0))
    throw DataError(piece_id_ + ": missing time signature at onset 0");
  for (std::size_t i = 0; i < time_sigs_.size(); ++i) {
    const auto& t = time_sigs_[i];
    if (t.numerator <= 0 || t.denominator <= 0)
      throw DataError(piece_id_ + ": invalid time signature " + std::to_string(t.numerator) + "/" +
                      std::to_string(t.denominator));
    if (i > 0 && time_sigs_[i - 1].onset == t.onset)
      throw DataError(piece_id_ + ": two time signatures at onset " + t.onset.to_string());
  }
  for (const auto& k : key_sigs_) {
    if (k.fifths < -7 || k.fifths > 7) throw DataError(piece_id_ + ": key signature fifths out of range");
    if (k.onset < Rational(0)) throw DataError(piece_id_ + ": negative key signature onset");
  }
  for (const auto& a : annotations_)
    if (a.beat_onset < Rational(0)) throw DataError(piece_id_ + ": negative cadence onset");
}

const TimeSignature& Score::time_signature_at(const Rational& onset) const {
  auto it = std::upper_bound(time_sigs_.begin(), time_sigs_.end(), onset,
                             [](const Rational& o, const TimeSignature& t) { return o < t.onset; });
  return it == time_sigs_.begin() ? time_sigs_.front() : *(it - 1);
}

int Score::key_fifths_at(const Rational& onset) const {
  int fifths = 0;
  for (const auto& k : key_sigs_) {
    if (k.onset > onset) break;
    fifths = k.fifths;
  }
  return fifths;
}

// ---------------------------------------------------------------------------

Score parse_note_table(std::string_view tsv, const nlohmann::json& meta, std::string piece_id) {
  static const std::vector<std::string> kColumns{"onset", "duration", "midi_pitch", "voice", "is_rest"};
  std::vector<NoteEvent> notes;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (std::string_view raw : split(tsv, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (trim(raw).empty() || raw.front() == '#') continue;
    auto fields = split(raw, '\t');
    if (!header_seen) {
      if (fields.size() != kColumns.size())
        throw ParseError("header must have the columns onset, duration, midi_pitch, voice, is_rest", line_no);
      for (std::size_t c = 0; c < kColumns.size(); ++c)
        if (trim(fields[c]) != kColumns[c])
          throw ParseError("expected header column '" + kColumns[c] + "', got '" + std::string(fields[c]) + "'",
                           line_no, c + 1);
      header_seen = true;
      continue;
    }
    if (fields.size() != kColumns.size())
      throw ParseError("expected 5 tab-separated fields, got " + std::to_string(fields.size()), line_no);
    NoteEvent n;
    try {
      n.onset = Rational::parse(trim(fields[0]));
      n.duration = Rational::parse(trim(fields[1]));
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (n.duration <= Rational(0)) throw ParseError("duration must be positive", line_no, 2);
    if (n.onset < Rational(0)) throw ParseError("onset must not be negative", line_no, 1);
    n.is_rest = parse_bool(fields[4], line_no);
    auto pitch = trim(fields[2]);
    try {
      if (!pitch.empty() && pitch != "-") n.midi_pitch = static_cast<int>(Rational::parse(pitch).num());
      n.voice = static_cast<int>(Rational::parse(trim(fields[3])).num());
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    if (n.is_rest && n.midi_pitch) throw ParseError("rest rows must leave midi_pitch empty", line_no, 3);
    if (!n.is_rest && !n.midi_pitch) throw ParseError("note rows need a midi_pitch", line_no, 3);
    if (n.midi_pitch && (*n.midi_pitch < 0 || *n.midi_pitch > 127))
      throw ParseError("midi_pitch out of range 0..127", line_no, 3);
    if (n.voice < 0) throw ParseError("voice must be >= 0", line_no, 4);
    notes.push_back(n);
  }
  if (!header_seen) throw ParseError("missing header row", line_no == 0 ? 1 : line_no);

  std::vector<TimeSignature> ts;
  std::vector<KeySignature> ks;
  std::vector<CadenceAnnotation> ann;
  read_meta(meta, ts, ks, ann);
  return Score(std::move(piece_id), std::move(notes), std::move(ts), std::move(ks), std::move(ann));
}

Score parse_note_table_json(const nlohmann::json& doc, std::string piece_id) {
  if (!doc.is_object() || !doc.contains("notes") || !doc.at("notes").is_array())
    throw DataError("note table JSON needs a \"notes\" array");
  std::vector<NoteEvent> notes;
  std::size_t idx = 0;
  for (const auto& row : doc.at("notes")) {
    ++idx;
    try {
      NoteEvent n;
      n.onset = json_rational(row.at("onset"), "onset");
      n.duration = json_rational(row.at("duration"), "duration");
      n.voice = row.value("voice", 0);
      n.is_rest = row.value("is_rest", false);
      if (row.contains("midi_pitch") && !row.at("midi_pitch").is_null()) n.midi_pitch = row.at("midi_pitch").get<int>();
      if (n.duration <= Rational(0)) throw DataError("duration must be positive");
      notes.push_back(n);
    } catch (const std::exception& e) {
      throw ParseError(std::string("notes[") + std::to_string(idx - 1) + "]: " + e.what(), idx);
    }
  }
  std::vector<TimeSignature> ts;
  std::vector<KeySignature> ks;
  std::vector<CadenceAnnotation> ann;
  read_meta(doc, ts, ks, ann);
  return Score(doc.value("piece_id", piece_id), std::move(notes), std::move(ts), std::move(ks), std::move(ann));
}

std::vector<CadenceAnnotation> parse_cadence_list(const nlohmann::json& meta) {
  std::vector<TimeSignature> ts;
  std::vector<KeySignature> ks;
  std::vector<CadenceAnnotation> ann;
  if (!meta.is_object()) throw DataError("meta: expected a JSON object");
  nlohmann::json only = nlohmann::json::object();
  if (meta.contains("cadences")) only["cadences"] = meta.at("cadences");
  read_meta(only, ts, ks, ann);
  return ann;
}

Score with_annotations(const Score& score, std::vector<CadenceAnnotation> annotations) {
  return Score(score.piece_id(), score.notes(), score.time_signatures(), score.key_signatures(), std::move(annotations));
}

std::string write_note_table_tsv(const Score& score) {
  std::ostringstream os;
  os << "onset\tduration\tmidi_pitch\tvoice\tis_rest\n";
  for (const auto& n : score.notes()) {
    os << n.onset << '\t' << n.duration << '\t';
    if (n.midi_pitch) os << *n.midi_pitch;
    os << '\t' << n.voice << '\t' << (n.is_rest ? 1 : 0) << '\n';
  }
  return os.str();
}

nlohmann::json write_note_table_meta(const Score& score) {
  nlohmann::json meta;
  meta["piece_id"] = score.piece_id();
  meta["time_signatures"] = nlohmann::json::array();
  for (const auto& t : score.time_signatures())
    meta["time_signatures"].push_back({{"onset", rational_json(t.onset)}, {"num", t.numerator}, {"den", t.denominator}});
  meta["key_signatures"] = nlohmann::json::array();
  for (const auto& k : score.key_signatures())
    meta["key_signatures"].push_back({{"onset", rational_json(k.onset)}, {"fifths", k.fifths}});
  meta["cadences"] = nlohmann::json::array();
  for (const auto& a : score.annotations())
    meta["cadences"].push_back({{"onset", rational_json(a.beat_onset)}, {"type", std::string(to_string(a.type))}});
  return meta;
}

// ---------------------------------------------------------------------------

BeatInfo beat_of(const Score& score, const Rational& onset) {
  if (onset < Rational(0)) throw DataError("beat_of: negative onset " + onset.to_string());
  const auto& sigs = score.time_signatures();
  std::int64_t measure = 1;
  std::size_t k = 0;
  Rational seg_start(0);
  while (k + 1 < sigs.size() && sigs[k + 1].onset <= onset) {
    // Measures in [seg_start, next change); a partial final measure still counts.
    Rational span = sigs[k + 1].onset - seg_start;
    Rational mlen = sigs[k].measure_length();
    Rational q = span / mlen;
    std::int64_t count = q.floor() + (q.is_integer() ? 0 : 1);
    measure += count;
    seg_start = sigs[k + 1].onset;
    ++k;
  }
  const auto& ts = sigs[k];
  Rational mlen = ts.measure_length();
  Rational blen = ts.beat_length();
  std::int64_t m = ((onset - seg_start) / mlen).floor();
  Rational measure_start = seg_start + Rational(m) * mlen;
  std::int64_t b = ((onset - measure_start) / blen).floor();
  BeatInfo info;
  info.measure = static_cast<int>(measure + m);
  info.beat = static_cast<int>(b);
  info.beat_start = measure_start + Rational(b) * blen;
  info.beat_length = blen;
  info.measure_start = measure_start;
  info.measure_length = mlen;
  return info;
}

int LabelScheme::label_of(CadenceType t) const noexcept {
  for (std::size_t i = 0; i < positive.size(); ++i)
    if (positive[i] == t) return static_cast<int>(i) + 1;
  return 0;
}

LabelScheme LabelScheme::parse(std::string_view list) {
  LabelScheme s;
  s.positive.clear();
  for (auto part : split(list, ',')) {
    if (trim(part).empty()) continue;
    auto t = parse_cadence_type(part);
    if (std::find(s.positive.begin(), s.positive.end(), t) != s.positive.end())
      throw DataError("cadence class listed twice: " + std::string(part));
    s.positive.push_back(t);
  }
  if (s.positive.empty()) throw DataError("label scheme needs at least one cadence class");
  return s;
}

std::string LabelScheme::to_string() const {
  std::string out;
  for (auto t : positive) {
    if (!out.empty()) out += ',';
    out += cadence::to_string(t);
  }
  return out;
}

Labeling assign_labels(const Score& score, const LabelScheme& scheme) {
  Labeling result;
  result.labels.assign(score.size(), 0);
  const auto& notes = score.notes();
  for (const auto& ann : score.annotations()) {
    int cls = scheme.label_of(ann.type);
    if (cls == 0) continue;
    BeatInfo bi = beat_of(score, ann.beat_onset);
    if (bi.beat_start != ann.beat_onset) {
      result.warnings.push_back(score.piece_id() + ": cadence at " + ann.beat_onset.to_string() +
                                " is not on a beat start; snapped to " + bi.beat_start.to_string());
    }
    Rational end = bi.beat_start + bi.beat_length;
    auto it = std::lower_bound(notes.begin(), notes.end(), bi.beat_start,
                               [](const NoteEvent& n, const Rational& t) { return n.onset < t; });
    for (; it != notes.end() && it->onset < end; ++it) {
      int& l = result.labels[it->id];
      if (l == 0 || cls < l) l = cls;
    }
  }
  return result;
}

}  // namespace cadence
