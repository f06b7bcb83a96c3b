#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace deltafs {

constexpr std::size_t kBlockSize = 4096;

// One 4 KiB block/page payload. Everything in the simulator moves in this unit.
using Page = std::array<std::uint8_t, kBlockSize>;

using Lba = std::uint32_t;
using InodeNum = std::uint32_t;

// Sentinel for "no flash block assigned yet" (appended page awaiting flush).
constexpr Lba kNullLba = 0xFFFFFFFFu;

// Largest inline-indexable file: 872 data offsets fill the 3488-byte area
// left after the reserved offset and the xattr region.
constexpr std::uint32_t kMaxFilePages = 872;

inline Page make_page(std::uint8_t fill = 0) {
  Page p;
  p.fill(fill);
  return p;
}

inline void store_u16le(std::uint8_t* dst, std::uint16_t v) {
  dst[0] = static_cast<std::uint8_t>(v);
  dst[1] = static_cast<std::uint8_t>(v >> 8);
}

inline void store_u32le(std::uint8_t* dst, std::uint32_t v) {
  dst[0] = static_cast<std::uint8_t>(v);
  dst[1] = static_cast<std::uint8_t>(v >> 8);
  dst[2] = static_cast<std::uint8_t>(v >> 16);
  dst[3] = static_cast<std::uint8_t>(v >> 24);
}

inline void store_u64le(std::uint8_t* dst, std::uint64_t v) {
  store_u32le(dst, static_cast<std::uint32_t>(v));
  store_u32le(dst + 4, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint16_t load_u16le(const std::uint8_t* src) {
  return static_cast<std::uint16_t>(src[0] | (src[1] << 8));
}

inline std::uint32_t load_u32le(const std::uint8_t* src) {
  return static_cast<std::uint32_t>(src[0]) | (static_cast<std::uint32_t>(src[1]) << 8) |
         (static_cast<std::uint32_t>(src[2]) << 16) | (static_cast<std::uint32_t>(src[3]) << 24);
}

inline std::uint64_t load_u64le(const std::uint8_t* src) {
  return static_cast<std::uint64_t>(load_u32le(src)) |
         (static_cast<std::uint64_t>(load_u32le(src + 4)) << 32);
}

}  // namespace deltafs
