#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pixeldoc/model.hpp"

namespace pixeldoc {

constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json model_config_to_json(const ModelConfig& cfg);
/// Overlays keys of `j` on `base`; unknown keys raise ConfigInvalid under `where`.
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& where = "model",
                                   ModelConfig base = {});

/// "PXDC" | version u32 | config JSON (u32 length + bytes) | tensor count u32 |
/// per tensor: name (u32 length + bytes), rows u32, cols u32, little-endian f32 data.
std::string serialize_checkpoint(const ModelParams<float>& params);
ModelParams<float> deserialize_checkpoint(const std::string& bytes, const std::string& where = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params);
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a over bytes, as 16 hex digits.
std::string fingerprint(const std::string& bytes);
std::string file_fingerprint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace pixeldoc
