#pragma once

#include "vdn/train/trainer.hpp"

#include <filesystem>
#include <string>

#include "json.hpp"

namespace vdn::net {
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
}  // namespace vdn::net

namespace vdn::train {

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

inline constexpr char kCheckpointMagic[4] = {'V', 'D', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  net::NetworkConfig network;
  TrainConfig train;
  int iteration = 0;
  ParamStore params;
};

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
/// Validates magic, version, header and payload length.
Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

/// Loads and checks every parameter against a freshly initialized `expected`
/// network; throws FormatError naming the first offending parameter.
Checkpoint checkpoint_load(const std::filesystem::path& path, const net::NetworkConfig& expected);
void check_params_match(const ParamStore& params, const net::NetworkConfig& expected, const std::string& source);

}  // namespace vdn::train
