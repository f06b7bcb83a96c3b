#pragma once

#include <cstddef>
#include <cstdint>

namespace deltafs {

// CRC-32 (IEEE 802.3 polynomial, reflected), as used for inode and
// superblock checksums.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

}  // namespace deltafs
