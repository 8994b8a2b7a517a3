#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "inpaint/networks.hpp"

namespace inpaint {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On disk: "INPCKPT\0", u32 version, u64 header length, header JSON, u32
// tensor count, then per tensor u32 name length, name, u32 n/c/h/w and the
// float64 values. Little-endian.
struct CheckpointData {
  nlohmann::json header;
  std::map<std::string, Tensor> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data,
                      std::uint32_t version = kCheckpointVersion);
// Throws LoadError for unreadable or malformed files and VersionError when
// the file was written by an incompatible format version.
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Adds every named handle under prefix + "/" + name.
void store_state(CheckpointData& data, const std::string& prefix,
                 const std::vector<NamedVar>& state);
// Copies stored values into the handles; shapes must match and every handle
// must be present.
void restore_state(const CheckpointData& data, const std::string& prefix,
                   const std::vector<NamedVar>& state);

// Generator rebuilt from the spec embedded in a checkpoint.
Generator load_generator(const std::filesystem::path& path);
Generator load_generator(const CheckpointData& data);

}  // namespace inpaint
