#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace modewise {

inline constexpr const char* kToolVersion = "0.1.0";

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

struct RunManifest {
  std::vector<std::string> command_line;
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> inputs;

  /// FNV-1a 64 over the command line, as hex.
  std::string config_hash() const;
  nlohmann::json to_json() const;
};

/// Writes `<artifact>.manifest.json` next to the artifact.
void write_manifest(const std::filesystem::path& artifact, const RunManifest& manifest);

}  // namespace modewise
