#include "cadence/checkpoint.hpp"

#include "binary_io.hpp"
#include "cadence/error.hpp"

namespace cadence {

std::string serialize_checkpoint(const ModelParams& params, const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["input_dim"] = params.config.input_dim;
  header["hidden_dim"] = params.config.hidden_dim;
  header["layers"] = params.config.layers;
  header["num_classes"] = params.config.num_classes;
  header["manifest_hash"] = params.config.manifest_hash;
  const std::string text = header.dump();

  io::Writer w;
  w.bytes("SGSM");
  w.scalar<std::uint16_t>(kCheckpointVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  params.for_each([&w](const std::string&, const Tensor2& m) {
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.scalar<double>(m.data()[i]);
  });
  return w.data();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  io::Reader r(bytes, "checkpoint");
  if (r.bytes(4) != "SGSM") throw DataError("checkpoint: bad magic (expected SGSM)");
  const auto version = r.scalar<std::uint16_t>();
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  const auto len = r.scalar<std::uint32_t>();
  ModelConfig mc;
  try {
    ck.header = nlohmann::json::parse(r.bytes(len));
    mc.input_dim = ck.header.at("input_dim").get<int>();
    mc.hidden_dim = ck.header.at("hidden_dim").get<int>();
    mc.layers = ck.header.at("layers").get<int>();
    mc.num_classes = ck.header.at("num_classes").get<int>();
    mc.manifest_hash = ck.header.at("manifest_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }
  try {
    ck.params = ModelParams::zeros(mc);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  ck.params.for_each([&r](const std::string& name, Tensor2& m) {
    const auto rows = r.scalar<std::uint32_t>();
    const auto cols = r.scalar<std::uint32_t>();
    if (rows != m.rows() || cols != m.cols()) throw DataError("checkpoint: unexpected shape for " + name);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.scalar<double>();
    if (!m.allFinite()) throw DataError("checkpoint: non-finite weights in " + name);
  });
  if (r.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const ModelParams& params, const std::string& path, const nlohmann::json& extra) {
  io::write_file(path, serialize_checkpoint(params, extra));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(io::read_file(path)); }

}  // namespace cadence
