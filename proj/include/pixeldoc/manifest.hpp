#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pixeldoc/corpus.hpp"
#include "pixeldoc/degrade.hpp"
#include "pixeldoc/scan.hpp"

namespace pixeldoc {

using Json = nlohmann::json;

// JSON forms shared by every manifest the tools write.  Word boxes use
// {text, x0, y0, x1, y1}; spans use {font, size, offset, ...}.
void to_json(Json& j, const WordBox& b);
void from_json(const Json& j, WordBox& b);
void to_json(Json& j, const RenderPlan& p);
void from_json(const Json& j, RenderPlan& p);
void to_json(Json& j, const AppliedTransform& t);
void from_json(const Json& j, AppliedTransform& t);
void to_json(Json& j, const EffectConfig& e);
void to_json(Json& j, const DegradationConfig& c);
/// Reads a (possibly partial) config on top of `base`; unknown keys raise
/// ConfigInvalid naming their path below `where`.
DegradationConfig degradation_from_json(const Json& j, const std::string& where,
                                        DegradationConfig base = {});
void to_json(Json& j, const ManifestEntry& e);
void from_json(const Json& j, ManifestEntry& e);

std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& lines);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace pixeldoc
