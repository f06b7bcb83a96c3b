#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "deltafs/types.hpp"

namespace deltafs {

// Compressed XOR of a Base and New page. Opaque to everything but the codec;
// other modules only look at size().
struct DeltaPayload {
  std::vector<std::uint8_t> bytes;

  std::size_t size() const { return bytes.size(); }
  bool operator==(const DeltaPayload&) const = default;
};

// One delta chunk: the page it belongs to plus the compressed XOR. The unit
// the inline area and the main-area compact blocks store and evict.
struct DeltaEntry {
  std::uint32_t page_index = 0;
  DeltaPayload payload;

  bool operator==(const DeltaEntry&) const = default;
};

// Pluggable lossless compressor. decompress(compress(x)) == x must hold for
// every byte sequence x. Layout structures carry explicit lengths, so
// swapping the codec never changes on-flash structure semantics.
class Compressor {
 public:
  virtual ~Compressor() = default;
  virtual std::vector<std::uint8_t> compress(const std::uint8_t* data, std::size_t len) const = 0;
  // Throws CorruptDelta on malformed input (truncated varint, missing
  // literal bytes).
  virtual std::vector<std::uint8_t> decompress(const std::uint8_t* data,
                                               std::size_t len) const = 0;
};

// Default codec: zero-run-length encoding with base-128 varints.
//
// The input is emitted as a sequence of tokens
//     (zero_run_len: varint)(literal_len: varint)(literal bytes)
// where varints are little-endian base-128 with a continuation bit. Tokens
// cover the input exactly; the sequence ends with the token covering the
// final byte. An empty-literal token is legal (used when the input ends in
// a zero run). XOR buffers produced by small in-place updates are almost
// entirely zero, which this encoding collapses to a few bytes.
class ZeroRleCodec final : public Compressor {
 public:
  std::vector<std::uint8_t> compress(const std::uint8_t* data, std::size_t len) const override;
  std::vector<std::uint8_t> decompress(const std::uint8_t* data, std::size_t len) const override;
};

// delta = compress(base XOR new). Deterministic for a fixed compressor.
DeltaPayload delta_encode(const Page& base, const Page& next, const Compressor& codec);

// base XOR decompress(delta). Throws CorruptDelta when the decompressed
// length is not exactly one page.
Page delta_apply(const Page& base, const DeltaPayload& delta, const Compressor& codec);

// new XOR decompress(delta) — recovers Base from the latest page content
// when re-updating an already-compressed page, without touching flash.
Page recover_base(const Page& next, const DeltaPayload& delta, const Compressor& codec);

}  // namespace deltafs
