#include "rotorlab/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "rotorlab/hash.hpp"

namespace rotorlab {

void RunManifest::add_input(const std::filesystem::path& p) { inputs.push_back({p.string(), sha256_file(p)}); }
void RunManifest::add_output(const std::filesystem::path& p) { outputs.push_back({p.string(), sha256_file(p)}); }

nlohmann::json RunManifest::to_json() const {
  auto files = [](const std::vector<FileRecord>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const FileRecord& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  return {{"format", "rotorlab-manifest"},
          {"tool_version", tool_version},
          {"subcommand", subcommand},
          {"argv", argv},
          {"seeds", seeds},
          {"config_hash", config_hash},
          {"config", config},
          {"inputs", files(inputs)},
          {"outputs", files(outputs)},
          {"results", results},
          {"started", started},
          {"finished", finished}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
}

}  // namespace rotorlab
