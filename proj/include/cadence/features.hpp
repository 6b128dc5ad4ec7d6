#pragma once

#include <array>
#include <bitset>
#include <initializer_list>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cadence/graph.hpp"
#include "cadence/manifest.hpp"
#include "cadence/score.hpp"

namespace cadence {

using PitchClassSet = std::bitset<12>;

PitchClassSet make_pcset(std::initializer_list<int> pcs);

/// Counts of unordered pitch-class pairs per interval class 1..6.
std::array<int, 6> interval_vector(const PitchClassSet& pcs);

inline constexpr std::array<std::string_view, 9> kChordTemplateNames{
    "major", "minor", "diminished", "augmented", "dominant7", "major7", "minor7", "half_diminished7", "diminished7"};

/// flag[k] is true iff `pcs` is a transposition of chord template k.
std::array<bool, 9> chord_template_flags(const PitchClassSet& pcs);

/// Everything sounding at one distinct onset: notes starting there plus held
/// notes whose interval covers it. Rests never sound.
struct OnsetSlice {
  Rational onset;
  std::vector<std::uint32_t> sounding;
  std::vector<std::uint32_t> starting;  // all nodes (rests included) with this onset
  PitchClassSet pcset;
  std::optional<int> lowest;
  std::optional<int> highest;
};

/// One slice per distinct onset, in onset order.
std::vector<OnsetSlice> onset_slices(const Score& score);

/// A block of feature columns for every node, with its manifest.
struct FeatureBlock {
  Eigen::MatrixXd values;
  FeatureManifest manifest;
};

inline constexpr int kGeneralWidth = 51;
inline constexpr int kSpectralWidth = 20;
inline constexpr int kCadenceLocalWidth = 12;

/// Note-level descriptors: position, duration, pitch, meter, key, melodic
/// motion and the intervallic content of the onset. Pitch-dependent columns
/// are zero for rests.
FeatureBlock general_features(const Score& score);

/// Voice-leading and voicing descriptors using only the node's onset slice and
/// the immediately preceding distinct onset slice.
FeatureBlock cadence_local_features(const Score& score);

struct SpectralOptions {
  int k = kSpectralWidth;
  /// Connected components up to this size use the dense eigensolver; larger
  /// ones use Lanczos with full reorthogonalization.
  std::uint32_t dense_limit = 2000;
  std::string piece_id;  // for error messages
};

struct SpectralResult {
  Eigen::VectorXd values;   // k eigenvalues, ascending (missing ones are 0)
  Eigen::MatrixXd vectors;  // n x k, zero-padded when n < k
  int found = 0;            // min(n, k)
};

/// Eigenvectors of the symmetric normalized Laplacian I - D^-1/2 A D^-1/2 for
/// the k smallest eigenvalues. Each column is unit-norm with its first
/// non-negligible component positive. Throws NumericError when the iterative
/// solver fails.
SpectralResult laplacian_eigenvectors(const ScoreGraph& adjacency, const SpectralOptions& opts = {});

FeatureBlock spectral_features(const ScoreGraph& adjacency, const SpectralOptions& opts = {});

enum class FeatureSet { all, general };

FeatureSet parse_feature_set(std::string_view s);
std::string_view to_string(FeatureSet s);

/// Concatenates GENERAL, SPECTRAL and (when given) CADENCE_LOCAL columns.
/// Throws NumericError naming the feature and node on NaN/Inf.
std::pair<FeatureMatrix, FeatureManifest> assemble(const FeatureBlock& general, const FeatureBlock& spectral,
                                                   const FeatureBlock* cadence_local);

/// Full pipeline for one score: edges, features, labels, graph.
ScoreGraph build_score_graph(const Score& score, const LabelScheme& scheme, FeatureSet set,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace cadence
