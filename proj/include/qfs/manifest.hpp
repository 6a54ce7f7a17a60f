#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qfs {

/// Record of one CLI invocation, written next to its outputs.
struct RunManifest {
    std::string command;
    nlohmann::json config;  // resolved settings after flag/file/default merging
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    /// Relative file path (to the manifest's directory when possible) -> hex SHA-256.
    std::map<std::string, std::string> checksums;
};

nlohmann::json to_json(const RunManifest& m);

/// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

std::string sha256_file(const std::filesystem::path& path);

/// Fills checksums for every output (directories are walked recursively,
/// skipping the manifest itself) and writes the manifest.
void write_manifest(const std::filesystem::path& path, RunManifest manifest);

}  // namespace qfs
