#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ocs {

std::string_view tool_version() noexcept;

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
/// Throws Error when the file cannot be read.
std::string sha256_file(const std::string& path);

/// UTC time in ISO 8601; SOURCE_DATE_EPOCH wins when set, so reruns can
/// produce byte-identical manifests.
std::string manifest_timestamp();

struct ManifestFile {
    std::string role;  ///< which artifact of the command: primary, ncurve, surface
    std::string path;  ///< as given on the command line
    std::string sha256;
    std::uint64_t bytes = 0;
};

/// Sidecar record for one CLI run.
struct RunManifest {
    std::string tool_version;
    std::string command;     ///< subcommand name
    nlohmann::json config;   ///< fully resolved configuration
    std::uint64_t seed = 0;
    std::string created_utc;
    std::vector<ManifestFile> outputs;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// "<out>.manifest.json".
std::string sidecar_path(const std::string& output_path);

}  // namespace ocs
