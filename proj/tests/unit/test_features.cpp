#include <doctest.h>

#include <cmath>

#include "cadence/error.hpp"
#include "cadence/features.hpp"
#include "cadence/random.hpp"
#include "jacobi.hpp"
#include "random_inputs.hpp"

using namespace cadence;

namespace {

Eigen::Index column(const FeatureManifest& m, const std::string& name) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.entries[i].name == name) return static_cast<Eigen::Index>(i);
  FAIL("no column " << name);
  return -1;
}

NoteEvent note(Rational on, Rational dur, int pitch, int voice = 0) { return {0, on, dur, pitch, voice, false}; }

Score score_of(std::vector<NoteEvent> notes, int fifths = 0) {
  return Score("f", std::move(notes), {{Rational(0), 4, 4}}, {{Rational(0), fifths}}, {});
}

/// Column-wise comparison of a spectral result against the Jacobi oracle.
void check_spectral(const ScoreGraph& g, const SpectralResult& r, int k) {
  const Eigen::MatrixXd lap = oracle::dense_normalized_laplacian(g);
  const auto ref = oracle::jacobi_eigen(lap);
  const Eigen::Index n = g.n;
  CHECK(r.found == std::min<Eigen::Index>(n, k));
  for (int j = 0; j < r.found; ++j) {
    Eigen::VectorXd v = r.vectors.col(j);
    CHECK(std::abs(v.norm() - 1) < 1e-6);
    CHECK((lap * v - r.values(j) * v).norm() < 1e-6);
    CHECK(std::abs(r.values(j) - ref.values(j)) < 1e-6);
    for (int i = 0; i < j; ++i) CHECK(std::abs(v.dot(r.vectors.col(i))) < 1e-6);
    const bool isolated = (j == 0 || ref.values(j) - ref.values(j - 1) > 1e-4) &&
                          (j + 1 >= n || ref.values(j + 1) - ref.values(j) > 1e-4);
    if (isolated) {
      Eigen::VectorXd w = ref.vectors.col(j);
      if (w.dot(v) < 0) w = -w;
      CHECK((w - v).norm() < 1e-6);
    }
  }
  for (int j = r.found; j < k; ++j) {
    CHECK(r.vectors.col(j).isZero(0));
    CHECK(r.values(j) == 0.0);
  }
}

}  // namespace

TEST_CASE("interval vectors") {
  CHECK(interval_vector(make_pcset({0})) == std::array<int, 6>{0, 0, 0, 0, 0, 0});
  CHECK(interval_vector(make_pcset({0, 4, 7})) == std::array<int, 6>{0, 0, 1, 1, 1, 0});
  CHECK(interval_vector(make_pcset({0, 1})) == std::array<int, 6>{1, 0, 0, 0, 0, 0});
  CHECK(interval_vector(make_pcset({0, 6})) == std::array<int, 6>{0, 0, 0, 0, 0, 1});
  // every pair counted once
  Random rng(2);
  for (int t = 0; t < 50; ++t) {
    PitchClassSet s;
    for (int pc = 0; pc < 12; ++pc) s[static_cast<std::size_t>(pc)] = rng.unit() < 0.4;
    auto iv = interval_vector(s);
    const auto c = static_cast<int>(s.count());
    CHECK(iv[0] + iv[1] + iv[2] + iv[3] + iv[4] + iv[5] == c * (c - 1) / 2);
  }
}

TEST_CASE("chord template flags") {
  auto only = [](const std::array<bool, 9>& f, int k) {
    for (int i = 0; i < 9; ++i)
      if (f[static_cast<std::size_t>(i)] != (i == k)) return false;
    return true;
  };
  CHECK(only(chord_template_flags(make_pcset({2, 6, 9})), 0));
  CHECK(only(chord_template_flags(make_pcset({7, 11, 2, 5})), 4));
  CHECK(only(chord_template_flags(make_pcset({9, 0, 4})), 1));
  CHECK(only(chord_template_flags(make_pcset({})), -1));
  // the diminished seventh is symmetric under minor-third transposition
  CHECK(only(chord_template_flags(make_pcset({1, 4, 7, 10})), 8));
}

TEST_CASE("general features") {
  Score s = score_of({note(0, 1, 60, 0), note(0, 1, 64, 1), note(0, 1, 67, 2), note(1, 1, 62, 0),
                      {0, Rational(3, 2), Rational(1, 2), std::nullopt, 1, true}, note(4, 4, 72, 0)});
  FeatureBlock fb = general_features(s);
  CHECK(fb.values.cols() == kGeneralWidth);
  CHECK(fb.manifest.count(FeatureCategory::GENERAL) == 51);
  const auto& m = fb.manifest;
  const auto& v = fb.values;
  // C-major triad at onset 0
  CHECK(v(0, column(m, "chord_major")) == 1.0);
  for (int ic = 1; ic <= 6; ++ic) {
    const double want = std::array<double, 6>{0, 0, 1, 1, 1, 0}[static_cast<std::size_t>(ic - 1)] / 4.0;
    CHECK(v(0, column(m, "interval_class_" + std::to_string(ic))) == want);
  }
  CHECK(v(0, column(m, "beat_position")) == 0.0);
  CHECK(v(0, column(m, "is_downbeat")) == 1.0);
  CHECK(v(0, column(m, "pitch_class_0")) == 1.0);
  CHECK(v(0, column(m, "midi_pitch")) == doctest::Approx(60.0 / 127));
  CHECK(v(0, column(m, "polyphony")) == doctest::Approx(3.0 / 8));
  CHECK(v(0, column(m, "ts_num_4")) == 1.0);
  CHECK(v(0, column(m, "ts_den_4")) == 1.0);
  // D after C in voice 0: a step up
  CHECK(v(3, column(m, "melodic_interval")) == doctest::Approx(2.0 / 12));
  CHECK(v(3, column(m, "is_step")) == 1.0);
  CHECK(v(3, column(m, "has_prev_in_voice")) == 1.0);
  CHECK(v(0, column(m, "has_prev_in_voice")) == 0.0);
  CHECK(v(3, column(m, "beat_position")) == doctest::Approx(0.25));
  // rest row
  CHECK(v(4, column(m, "is_rest")) == 1.0);
  for (int pc = 0; pc < 12; ++pc) CHECK(v(4, column(m, "pitch_class_" + std::to_string(pc))) == 0.0);
  // the whole note at measure 2 is the last node; its onset is half-way through
  CHECK(v(5, column(m, "onset_position")) == doctest::Approx(0.5));
  CHECK(v(5, column(m, "duration_beats")) == 1.0);
  CHECK(v(5, column(m, "is_downbeat")) == 1.0);
  CHECK(v(5, column(m, "is_leap")) == 1.0);
}

TEST_CASE("features stay inside their documented ranges") {
  Random rng(13);
  for (int t = 0; t < 30; ++t) {
    Score s = oracle::random_score(rng);
    for (const FeatureBlock& fb : {general_features(s), cadence_local_features(s)}) {
      for (Eigen::Index c = 0; c < fb.values.cols(); ++c) {
        const auto& e = fb.manifest.entries[static_cast<std::size_t>(c)];
        CHECK(fb.values.col(c).minCoeff() >= e.lo);
        CHECK(fb.values.col(c).maxCoeff() <= e.hi);
      }
    }
  }
}

TEST_CASE("cadence-local features") {
  SUBCASE("first onset has no predecessor") {
    Score s = score_of({note(0, 1, 43), note(1, 1, 48)});
    FeatureBlock fb = cadence_local_features(s);
    CHECK(fb.values.cols() == kCadenceLocalWidth);
    CHECK(fb.values(0, column(fb.manifest, "bass_fifth_motion")) == 0.0);
    // G2 then C3 in the bass
    CHECK(fb.values(1, column(fb.manifest, "bass_fifth_motion")) == 1.0);
    CHECK(fb.values(1, column(fb.manifest, "bass_step_motion")) == 0.0);
  }
  SUBCASE("leading tone resolves to the tonic") {
    Score s = score_of({note(0, 1, 71), note(1, 1, 72)});
    FeatureBlock fb = cadence_local_features(s);
    CHECK(fb.values(1, column(fb.manifest, "leading_tone_resolution")) == 1.0);
    CHECK(fb.values(0, column(fb.manifest, "leading_tone_resolution")) == 0.0);
    Score f_major = score_of({note(0, 1, 71), note(1, 1, 72)}, -1);
    CHECK(cadence_local_features(f_major).values(1, column(fb.manifest, "leading_tone_resolution")) == 0.0);
  }
  SUBCASE("soprano and voicing") {
    Score s = score_of({note(0, 1, 55, 1), note(0, 1, 74, 0), note(1, 1, 48, 1), note(1, 1, 72, 0)});
    FeatureBlock fb = cadence_local_features(s);
    const auto& m = fb.manifest;
    // ids: 55@0, 74@0, 48@1, 72@1
    CHECK(fb.values(3, column(m, "soprano_desc_step")) == 1.0);
    CHECK(fb.values(3, column(m, "is_highest_at_onset")) == 1.0);
    CHECK(fb.values(2, column(m, "is_lowest_at_onset")) == 1.0);
    CHECK(fb.values(2, column(m, "metric_on_beat")) == 1.0);
    CHECK(fb.values(0, column(m, "metric_downbeat")) == 1.0);
  }
}

TEST_CASE("spectral: single edge") {
  EdgeList e;
  e.pairs.push_back({0, 1, EdgeTag::ON});
  ScoreGraph g = adjacency_only(2, e);
  SpectralResult r = laplacian_eigenvectors(g, {.k = 2});
  CHECK(r.values(0) == doctest::Approx(0).epsilon(1e-12));
  CHECK(r.values(1) == doctest::Approx(2));
  const double h = 1 / std::sqrt(2.0);
  CHECK(r.vectors(0, 0) == doctest::Approx(h));
  CHECK(r.vectors(1, 0) == doctest::Approx(h));
  CHECK(r.vectors(0, 1) == doctest::Approx(h));
  CHECK(r.vectors(1, 1) == doctest::Approx(-h));
}

TEST_CASE("spectral: padding when n < k") {
  Random rng(1);
  ScoreGraph g = oracle::random_graph(rng, 5, 0.5, 1);
  SpectralResult r = laplacian_eigenvectors(g, {.k = 20});
  CHECK(r.found == 5);
  CHECK(r.vectors.rightCols(15).isZero(0));
  CHECK(spectral_features(g).values.cols() == 20);
}

TEST_CASE("spectral: dense path vs Jacobi") {
  Random rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<std::uint32_t>(2 + rng.index(40));
    ScoreGraph g = oracle::random_graph(rng, n, 0.05 + 0.3 * rng.unit(), 1);
    CAPTURE(n);
    check_spectral(g, laplacian_eigenvectors(g, {.k = 20}), 20);
  }
}

TEST_CASE("spectral: Lanczos path vs Jacobi") {
  Random rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto n = static_cast<std::uint32_t>(30 + rng.index(60));
    ScoreGraph g = oracle::random_graph(rng, n, 0.05 + 0.2 * rng.unit(), 1);
    CAPTURE(n);
    check_spectral(g, laplacian_eigenvectors(g, {.k = 20, .dense_limit = 8}), 20);
  }
}

TEST_CASE("feature assembly") {
  Score s = score_of({note(0, 1, 60), note(1, 1, 62), note(2, 2, 64)});
  ScoreGraph all = build_score_graph(s, LabelScheme{}, FeatureSet::all);
  ScoreGraph gen = build_score_graph(s, LabelScheme{}, FeatureSet::general);
  CHECK(all.features.cols() == 83);
  CHECK(all.manifest.count(FeatureCategory::GENERAL) == 51);
  CHECK(all.manifest.count(FeatureCategory::SPECTRAL) == 20);
  CHECK(all.manifest.count(FeatureCategory::CADENCE_LOCAL) == 12);
  CHECK(gen.features.cols() == 71);
  CHECK(gen.manifest.count(FeatureCategory::CADENCE_LOCAL) == 0);
  CHECK(all.manifest.hash() != gen.manifest.hash());
  CHECK(all.features.leftCols(71) == gen.features);
  CHECK(FeatureManifest::from_json(all.manifest.to_json()) == all.manifest);

  FeatureBlock a = general_features(s), b = spectral_features(all);
  a.values(1, 2) = std::nan("");
  CHECK_THROWS_AS(assemble(a, b, nullptr), NumericError);
  CHECK_THROWS_AS(parse_feature_set("fancy"), DataError);
}
