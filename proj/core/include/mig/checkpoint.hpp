#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mig/network.hpp"

namespace mig {

/// Everything needed to resume training or to render from a trained model.
struct Checkpoint {
    Network network;
    LatentTable latents;
    AdamState network_adam;
    std::vector<AdamState> latent_adam;  // one per family
    std::vector<std::string> families;
    std::string alphabet;     // UTF-8 label symbols, in label order
    std::string config_json;  // effective run configuration
    int epoch = 0;            // epochs completed
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout:
///   8 bytes  magic "MIGCKPT\0"
///   uint32   version
///   uint64   manifest length in bytes
///   manifest UTF-8 JSON (shape, alphabet, families, optimizer scalars, config echo, payload layout)
///   payload  little-endian float64: network parameters, latent codes, network ADAM m and v,
///            then ADAM m and v per family
std::vector<unsigned char> encode_checkpoint(const Checkpoint &ckpt);

/// Throws IoError for a bad magic/version/truncation and ConfigError when `expected` disagrees
/// with the stored network shape.
Checkpoint decode_checkpoint(const std::vector<unsigned char> &bytes, const std::string &what,
                             const std::optional<NetworkShape> &expected = std::nullopt);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path, const std::optional<NetworkShape> &expected = std::nullopt);

} // namespace mig
