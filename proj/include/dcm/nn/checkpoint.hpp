#ifndef DCM_NN_CHECKPOINT_HPP
#define DCM_NN_CHECKPOINT_HPP

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "dcm/nn/network.hpp"

namespace dcm::nn {

/// Byte layout, all integers little-endian:
///   8 bytes   magic "DCMCKPT\0"
///   uint32    format version (1)
///   uint64    header length H
///   H bytes   UTF-8 JSON: {"config": NetworkConfig, "tensors": [{"name", "shape": [rows, cols], "offset"}], "meta": {...}}
///   payload   float32 row-major tensor data; "offset" counts bytes from the payload start
/// Tensors cover every parameter and the batch-norm running statistics.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(Network& net, const std::filesystem::path& path, const nlohmann::json& meta = nlohmann::json::object());

struct LoadedCheckpoint {
    std::unique_ptr<Network> network;
    nlohmann::json meta;
};

/// Rebuilds the network from the embedded config and fills every tensor.
/// Missing tensors or shape mismatches throw IoError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dcm::nn

#endif  // DCM_NN_CHECKPOINT_HPP
