#include "cadence/manifest.hpp"

#include <cstdio>
#include <unordered_set>

#include "cadence/error.hpp"

namespace cadence {

std::string_view to_string(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::GENERAL: return "GENERAL";
    case FeatureCategory::SPECTRAL: return "SPECTRAL";
    case FeatureCategory::CADENCE_LOCAL: return "CADENCE_LOCAL";
  }
  return "?";
}

FeatureCategory parse_feature_category(std::string_view s) {
  if (s == "GENERAL") return FeatureCategory::GENERAL;
  if (s == "SPECTRAL") return FeatureCategory::SPECTRAL;
  if (s == "CADENCE_LOCAL") return FeatureCategory::CADENCE_LOCAL;
  throw DataError("unknown feature category '" + std::string(s) + "'");
}

void FeatureManifest::add(std::string name, FeatureCategory category, double lo, double hi) {
  entries.push_back({std::move(name), category, lo, hi});
}

void FeatureManifest::append(const FeatureManifest& other) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) seen.insert(e.name);
  for (const auto& e : other.entries) {
    if (!seen.insert(e.name).second) throw DataError("duplicate feature name '" + e.name + "'");
    entries.push_back(e);
  }
}

std::size_t FeatureManifest::count(FeatureCategory c) const {
  std::size_t k = 0;
  for (const auto& e : entries) k += e.category == c;
  return k;
}

std::string FeatureManifest::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (const auto& e : entries) {
    for (char c : e.name) mix(static_cast<unsigned char>(c));
    mix(0);
    mix(static_cast<unsigned char>(e.category));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json FeatureManifest::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries)
    arr.push_back({{"name", e.name}, {"category", std::string(to_string(e.category))}, {"min", e.lo}, {"max", e.hi}});
  return arr;
}

FeatureManifest FeatureManifest::from_json(const nlohmann::json& j) {
  FeatureManifest m;
  try {
    for (const auto& e : j)
      m.add(e.at("name").get<std::string>(), parse_feature_category(e.at("category").get<std::string>()),
            e.at("min").get<double>(), e.at("max").get<double>());
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("feature manifest: ") + ex.what());
  }
  return m;
}

}  // namespace cadence
