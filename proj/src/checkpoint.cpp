#include "rotorlab/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace rotorlab {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "rotorlab-checkpoint";
constexpr int kVersion = 1;

const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw CheckpointError("checkpoint is missing field '" + where + key + "'");
  return j.at(key);
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint field '" + where + key + "' is malformed: " + e.what());
  }
}

json layers_to_json(const Mlp& net) {
  json layers = json::array();
  for (const DenseLayer& l : net.layers) {
    layers.push_back({{"rows", l.rows},
                      {"cols", l.cols},
                      {"weights", l.weight},
                      {"bias", l.bias},
                      {"activation", to_string(l.activation)}});
  }
  return layers;
}

Mlp mlp_from_json(const json& j, std::size_t obs_dim, const std::string& where) {
  Mlp net;
  net.input_scale = j.contains("input_scale") ? get<std::vector<double>>(j, "input_scale", where)
                                              : std::vector<double>(obs_dim, 1.0);
  const json& layers = field(j, "layers", where);
  if (!layers.is_array() || layers.empty()) throw CheckpointError("checkpoint field '" + where + "layers' must be a non-empty array");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string at = where + "layers[" + std::to_string(k) + "].";
    DenseLayer l;
    l.rows = get<std::size_t>(layers[k], "rows", at);
    l.cols = get<std::size_t>(layers[k], "cols", at);
    l.weight = get<std::vector<double>>(layers[k], "weights", at);
    l.bias = get<std::vector<double>>(layers[k], "bias", at);
    try {
      l.activation = parse_activation(get<std::string>(layers[k], "activation", at));
    } catch (const InvalidInput& e) {
      throw CheckpointError("checkpoint field '" + at + "activation': " + e.what());
    }
    net.layers.push_back(std::move(l));
  }
  try {
    net.validate();
  } catch (const InvalidInput& e) {
    throw CheckpointError(std::string("checkpoint ") + where + "layers are inconsistent: " + e.what());
  }
  return net;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["obs_dim"] = ckpt.policy.obs_dim();
  j["act_dim"] = ckpt.policy.act_dim();
  j["input_scale"] = ckpt.policy.mean.input_scale;
  j["layers"] = layers_to_json(ckpt.policy.mean);
  j["log_std"] = ckpt.policy.log_std;
  if (ckpt.value) {
    j["value"] = {{"input_scale", ckpt.value->net.input_scale}, {"layers", layers_to_json(ckpt.value->net)}};
  }
  j["metadata"] = {{"seed", ckpt.metadata.seed},
                   {"training_steps", ckpt.metadata.training_steps},
                   {"reward_config_hash", ckpt.metadata.reward_config_hash}};
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ckpt;
  const auto obs_dim = get<std::size_t>(j, "obs_dim", "");
  const auto act_dim = get<std::size_t>(j, "act_dim", "");
  ckpt.policy.mean = mlp_from_json(j, obs_dim, "");
  ckpt.policy.log_std = get<std::vector<double>>(j, "log_std", "");
  if (ckpt.policy.obs_dim() != obs_dim) throw CheckpointError("checkpoint obs_dim does not match the first layer");
  if (ckpt.policy.act_dim() != act_dim) throw CheckpointError("checkpoint act_dim does not match the last layer");
  if (ckpt.policy.log_std.size() != act_dim) throw CheckpointError("checkpoint log_std length does not match act_dim");
  if (j.contains("value")) ckpt.value = ValueParams{mlp_from_json(j.at("value"), obs_dim, "value.")};
  const json& meta = field(j, "metadata", "");
  ckpt.metadata.seed = get<std::uint64_t>(meta, "seed", "metadata.");
  ckpt.metadata.training_steps = get<std::uint64_t>(meta, "training_steps", "metadata.");
  ckpt.metadata.reward_config_hash = get<std::string>(meta, "reward_config_hash", "metadata.");
  return ckpt;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) { return checkpoint_to_json(ckpt).dump(1) + "\n"; }

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace rotorlab
