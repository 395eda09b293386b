#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace rotorlab {

inline constexpr const char* kToolVersion = "0.1.0";

struct FileRecord {
  std::string path;
  std::string sha256;
};

/// What a CLI run consumed and produced. `config` is the fully resolved
/// configuration, so feeding it back via --config repeats the run.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  nlohmann::json config;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  nlohmann::json results = nlohmann::json::object();
  std::string tool_version = kToolVersion;
  std::string started;   // UTC, ISO 8601
  std::string finished;

  void add_input(const std::filesystem::path& p);
  void add_output(const std::filesystem::path& p);
  nlohmann::json to_json() const;
};

std::string utc_timestamp();
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

}  // namespace rotorlab
