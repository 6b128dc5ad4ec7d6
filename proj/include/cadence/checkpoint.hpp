#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "cadence/model.hpp"

namespace cadence {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// "SGSM", u16 version, u32-length JSON header (input_dim, hidden_dim, layers,
/// num_classes, manifest_hash, plus `extra`), then every matrix in
/// ModelParams::for_each order as u32 rows, u32 cols and rows*cols f64
/// little-endian values, row-major.
std::string serialize_checkpoint(const ModelParams& params, const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
  ModelParams params;
  nlohmann::json header;
};

Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelParams& params, const std::string& path,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cadence
