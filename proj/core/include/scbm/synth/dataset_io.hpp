#pragma once

#include <cstdint>
#include <string>

#include "scbm/synth/dataset.hpp"

namespace scbm::synth {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

/// Writes the versioned binary dataset format (see docs/formats.md).
void save(const Dataset& ds, const std::string& path);

/// Throws IoError on a bad magic or truncated file, VersionError on a newer
/// format, ChecksumError when the payload does not match its CRC-32.
Dataset load(const std::string& path);

/// In-memory variants used by tests and the file functions.
std::vector<std::uint8_t> serialize(const Dataset& ds);
Dataset deserialize(std::vector<std::uint8_t> bytes);

}  // namespace scbm::synth
