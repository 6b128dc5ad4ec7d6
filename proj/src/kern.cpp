#include "cadence/kern.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string_view>

#include "cadence/error.hpp"

namespace cadence {

namespace {

constexpr std::string_view kIgnorable = "LJKk/\\'\"`~^;:(){}&<>xXyYNTtMmWwS$RoOuUvVzZpPHhIij?,|@+*";

struct Spine {
  bool kern = false;
  bool ended = false;
  int voice = -1;
  Rational cursor{0};
  std::map<int, std::size_t> open_ties;  // midi pitch -> note index
};

enum class Tie { none, start, middle, end };

struct ParsedToken {
  Rational duration;
  std::optional<int> pitch;  // empty => rest
  Tie tie = Tie::none;
  bool grace = false;
};

int letter_pc(char c) {
  switch (std::tolower(static_cast<unsigned char>(c))) {
    case 'c': return 0;
    case 'd': return 2;
    case 'e': return 4;
    case 'f': return 5;
    case 'g': return 7;
    case 'a': return 9;
    case 'b': return 11;
  }
  return -1;
}

ParsedToken parse_token(std::string_view tok, std::size_t line, std::size_t col0) {
  ParsedToken out;
  std::string recip;
  int dots = 0;
  char letter = 0;
  int letter_count = 0;
  int accidental = 0;
  bool rest = false;
  bool recip_done = false;

  for (std::size_t i = 0; i < tok.size(); ++i) {
    char c = tok[i];
    std::size_t col = col0 + i;
    if (!recip.empty() && !std::isdigit(static_cast<unsigned char>(c))) recip_done = true;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      if (recip_done || letter_count > 0 || rest || dots > 0)
        throw ParseError("misplaced digit in '" + std::string(tok) + "'", line, col);
      recip += c;
      continue;
    } else if (c == '%') {
      throw ParseError("rational recip values are not supported: '" + std::string(tok) + "'", line, col);
    } else if (c == '.') {
      if (recip.empty()) throw ParseError("dot without duration in '" + std::string(tok) + "'", line, col);
      ++dots;
    } else if (letter_pc(c) >= 0) {
      if (rest) throw ParseError("pitch letter in a rest token", line, col);
      if (letter_count > 0 && c != letter) throw ParseError("mixed pitch letters in '" + std::string(tok) + "'", line, col);
      letter = c;
      ++letter_count;
    } else if (c == 'r') {
      if (letter_count > 0) throw ParseError("rest marker in a pitched token", line, col);
      rest = true;
    } else if (c == '#') {
      ++accidental;
    } else if (c == '-') {
      --accidental;
    } else if (c == 'n') {
      // explicit natural
    } else if (c == '[') {
      out.tie = Tie::start;
    } else if (c == '_') {
      out.tie = Tie::middle;
    } else if (c == ']') {
      out.tie = Tie::end;
    } else if (c == 'q' || c == 'Q') {
      out.grace = true;
    } else if (kIgnorable.find(c) != std::string_view::npos) {
      // articulation, beaming, stem and similar layout signifiers
    } else {
      throw ParseError("unparseable character '" + std::string(1, c) + "' in token '" + std::string(tok) + "'", line,
                       col);
    }
  }

  if (!rest && letter_count == 0) throw ParseError("token '" + std::string(tok) + "' has no pitch or rest", line, col0);
  if (!rest) {
    int pc = letter_pc(letter);
    int octave = std::islower(static_cast<unsigned char>(letter)) ? 4 + (letter_count - 1) : 3 - (letter_count - 1);
    int midi = 12 * (octave + 1) + pc + accidental;
    if (midi < 0 || midi > 127) throw ParseError("pitch out of MIDI range in '" + std::string(tok) + "'", line, col0);
    out.pitch = midi;
  }
  if (out.grace) return out;
  if (recip.empty()) throw ParseError("token '" + std::string(tok) + "' has no duration", line, col0);

  Rational base;
  if (recip == "0") {
    base = Rational(8);
  } else if (recip == "00") {
    base = Rational(16);
  } else if (recip == "000") {
    base = Rational(32);
  } else {
    std::int64_t d = std::stoll(recip);
    if (d <= 0) throw ParseError("invalid recip in '" + std::string(tok) + "'", line, col0);
    base = Rational(4, d);
  }
  Rational dur = base;
  Rational add = base;
  for (int i = 0; i < dots; ++i) {
    add = add / Rational(2);
    dur += add;
  }
  out.duration = dur;
  return out;
}

std::optional<TimeSignature> parse_meter(std::string_view tok) {
  // *M3/4 (but not *MM tempo markings)
  if (tok.size() < 5 || tok.substr(0, 2) != "*M" || !std::isdigit(static_cast<unsigned char>(tok[2])))
    return std::nullopt;
  auto slash = tok.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto num = tok.substr(2, slash - 2);
  auto den = tok.substr(slash + 1);
  auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  };
  if (!digits(num) || !digits(den)) return std::nullopt;
  TimeSignature ts;
  ts.numerator = std::stoi(std::string(num));
  ts.denominator = std::stoi(std::string(den));
  if (ts.numerator <= 0 || ts.denominator <= 0) return std::nullopt;
  return ts;
}

std::optional<int> parse_key(std::string_view tok) {
  if (tok.size() < 4 || tok.substr(0, 3) != "*k[" || tok.back() != ']') return std::nullopt;
  int sharps = 0, flats = 0;
  for (char c : tok.substr(3, tok.size() - 4)) {
    if (c == '#') ++sharps;
    if (c == '-') ++flats;
  }
  return sharps > 0 ? std::min(sharps, 7) : -std::min(flats, 7);
}

}  // namespace

Score parse_kern(std::string_view text, std::string piece_id, std::vector<std::string>* warnings) {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(piece_id + ": " + std::move(msg));
  };

  std::vector<Spine> spines;
  std::vector<NoteEvent> notes;
  std::map<Rational, TimeSignature> meters;
  std::map<Rational, int> keys;
  bool header = false;
  int kern_count = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '!') continue;

    std::vector<std::string_view> tokens;
    std::vector<std::size_t> columns;
    {
      std::size_t s = 0;
      for (;;) {
        auto t = line.find('\t', s);
        tokens.push_back(line.substr(s, t == std::string_view::npos ? std::string_view::npos : t - s));
        columns.push_back(s + 1);
        if (t == std::string_view::npos) break;
        s = t + 1;
      }
    }

    if (!header) {
      if (line.substr(0, 2) != "**") throw ParseError("expected exclusive interpretations (**kern)", line_no);
      for (auto tok : tokens) {
        Spine sp;
        sp.kern = tok == "**kern";
        if (sp.kern) sp.voice = kern_count++;
        spines.push_back(sp);
      }
      if (kern_count == 0) throw ParseError("no **kern spine found", line_no);
      header = true;
      continue;
    }
    if (std::all_of(spines.begin(), spines.end(), [](const Spine& s) { return s.ended; })) break;
    if (tokens.size() != spines.size())
      throw ParseError("expected " + std::to_string(spines.size()) + " spines, found " + std::to_string(tokens.size()),
                       line_no);

    if (line.front() == '*') {
      for (std::size_t s = 0; s < tokens.size(); ++s) {
        auto tok = tokens[s];
        if (tok == "*^" || tok == "*v" || tok == "*+" || tok == "*x")
          throw UnsupportedFeature("spine manipulator '" + std::string(tok) + "' is not supported", line_no, columns[s]);
        if (tok == "*-") {
          spines[s].ended = true;
          continue;
        }
        if (!spines[s].kern) continue;
        if (auto ts = parse_meter(tok)) {
          ts->onset = spines[s].cursor;
          auto [it, inserted] = meters.emplace(ts->onset, *ts);
          if (!inserted && (it->second.numerator != ts->numerator || it->second.denominator != ts->denominator))
            warn("conflicting time signatures at onset " + ts->onset.to_string() + "; keeping the first");
        } else if (auto k = parse_key(tok)) {
          keys.emplace(spines[s].cursor, *k);
        }
      }
      continue;
    }
    if (line.front() == '=') continue;

    for (std::size_t s = 0; s < tokens.size(); ++s) {
      Spine& sp = spines[s];
      if (!sp.kern || sp.ended) continue;
      auto tok = tokens[s];
      if (tok == "." || tok.empty()) continue;

      std::optional<Rational> advance;
      std::size_t sub_start = 0;
      while (sub_start <= tok.size()) {
        auto sp_pos = tok.find(' ', sub_start);
        auto sub = tok.substr(sub_start, sp_pos == std::string_view::npos ? std::string_view::npos : sp_pos - sub_start);
        std::size_t col = columns[s] + sub_start;
        sub_start = sp_pos == std::string_view::npos ? tok.size() + 1 : sp_pos + 1;
        if (sub.empty()) continue;

        ParsedToken p = parse_token(sub, line_no, col);
        if (p.grace) {
          warn("grace note dropped at line " + std::to_string(line_no));
          continue;
        }
        advance = advance ? std::min(*advance, p.duration) : p.duration;

        if (p.pitch && (p.tie == Tie::middle || p.tie == Tie::end)) {
          auto it = sp.open_ties.find(*p.pitch);
          if (it != sp.open_ties.end()) {
            notes[it->second].duration += p.duration;
            if (p.tie == Tie::end) sp.open_ties.erase(it);
            continue;
          }
          warn("tie continuation without a start at line " + std::to_string(line_no));
        }
        NoteEvent n;
        n.onset = sp.cursor;
        n.duration = p.duration;
        n.midi_pitch = p.pitch;
        n.is_rest = !p.pitch.has_value();
        n.voice = sp.voice;
        notes.push_back(n);
        if (p.pitch && (p.tie == Tie::start || p.tie == Tie::middle)) sp.open_ties[*p.pitch] = notes.size() - 1;
      }
      if (advance) sp.cursor += *advance;
    }
  }
  if (!header) throw ParseError("empty document: no **kern header", line_no == 0 ? 1 : line_no);

  std::vector<TimeSignature> ts;
  for (auto& [onset, t] : meters) ts.push_back(t);
  std::vector<KeySignature> ks;
  int last = 99;
  for (auto& [onset, fifths] : keys) {
    if (fifths == last) continue;
    ks.push_back({onset, fifths});
    last = fifths;
  }
  return Score(std::move(piece_id), std::move(notes), std::move(ts), std::move(ks), {});
}

}  // namespace cadence
