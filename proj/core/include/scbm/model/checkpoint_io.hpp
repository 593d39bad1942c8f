#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scbm/model/train.hpp"

namespace scbm {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
/// Throws IoError (bad magic, truncation), VersionError or ChecksumError.
Checkpoint deserialize_checkpoint(std::vector<std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Hex CRC-32 of the serialized checkpoint; identifies the model in API payloads.
std::string checkpoint_hash(const std::vector<std::uint8_t>& bytes);
std::string checkpoint_hash(const Checkpoint& ck);

}  // namespace scbm
