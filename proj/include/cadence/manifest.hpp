#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cadence {

enum class FeatureCategory : std::uint8_t { GENERAL, SPECTRAL, CADENCE_LOCAL };

std::string_view to_string(FeatureCategory c);
FeatureCategory parse_feature_category(std::string_view s);

/// Ordered, named feature columns. Width must equal the feature matrix width.
struct FeatureManifest {
  struct Entry {
    std::string name;
    FeatureCategory category;
    double lo;  // documented value range
    double hi;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  void add(std::string name, FeatureCategory category, double lo, double hi);
  /// Appends all entries of `other`; throws DataError on duplicate names.
  void append(const FeatureManifest& other);
  std::size_t count(FeatureCategory c) const;

  /// Stable 64-bit FNV-1a over names and categories, as 16 hex digits.
  std::string hash() const;

  nlohmann::json to_json() const;
  static FeatureManifest from_json(const nlohmann::json& j);

  friend bool operator==(const FeatureManifest&, const FeatureManifest&) = default;
};

}  // namespace cadence
