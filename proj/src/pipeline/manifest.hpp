#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace needscope {

inline constexpr std::string_view kToolName = "needscope";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr std::string_view kManifestName = "manifest.json";

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

// Process-wide command line recorded in every manifest written afterwards.
void set_command_line(std::vector<std::string> args);
std::vector<std::string> command_line();

std::string utc_now_iso();

struct StageRecord {
  std::string stage;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string taxonomy_version;
  std::map<std::string, std::uint64_t> seeds;
  nlohmann::json parameters = nlohmann::json::object();
  std::string started_at;
  std::string finished_at;
};

// Manifest JSON for one stage without file digests: tool version, command
// line, parameters, seeds, taxonomy version and timestamps.
nlohmann::json stage_json(const StageRecord& record);

// Merges `record` into `<dir>/manifest.json`, replacing any earlier entry for
// the same stage, and rewrites the file atomically. Input and output digests
// are keyed by path, relative to `dir` when the file lives inside it.
void record_stage(const std::filesystem::path& dir, const StageRecord& record);

// Manifest contents with every timestamp field removed.
nlohmann::json strip_timestamps(nlohmann::json manifest);

}  // namespace needscope
