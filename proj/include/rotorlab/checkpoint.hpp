#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "rotorlab/policy.hpp"

namespace rotorlab {

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  std::uint64_t training_steps = 0;
  std::string reward_config_hash;
};

/// Everything a training run leaves behind. The value network is optional
/// and is discarded when the checkpoint is frozen.
struct Checkpoint {
  PolicyParams policy;
  std::optional<ValueParams> value;
  CheckpointMetadata metadata;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws CheckpointError naming the first missing or malformed field.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rotorlab
