#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "contiguard/model.hpp"
#include "contiguard/replay.hpp"

namespace contiguard {

// Self-describing binary container: magic + version, a JSON manifest (shapes,
// offsets, run config, RNG state, memory buffer), then raw little-endian
// float64 arrays.
inline constexpr char kCheckpointMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    DetectorParams params;
    nlohmann::json config;  // resolved run config
    std::string rng_state;
    MemoryBuffer memories;
};

void save_checkpoint(const std::string& path, const DetectorParams& params,
                     const nlohmann::json& config, const std::string& rng_state,
                     const MemoryBuffer& memories);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace contiguard
