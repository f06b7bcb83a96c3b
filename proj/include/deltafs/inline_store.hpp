#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "deltafs/delta_codec.hpp"
#include "deltafs/types.hpp"

namespace deltafs {

struct CacheStats;

enum class CompressType : std::uint8_t { None = 0, Inline = 1, Main = 2 };

// Constants of the latency model driving the inline replacement arbiter:
//   benefit  = spared_bytes / alpha * (gamma - beta)
//   overhead = gamma + epsilon + HR * lambda + (1 - HR) * delta_miss
// HR is the live base hit rate unless forced_hr pins it.
struct LatencyParams {
  double alpha_bytes = 72.0;     // average delta entry size
  double beta_us = 25.3;         // compressed-write latency
  double gamma_us = 954.0;       // uncompressed-write latency
  double epsilon_us = 6.9;       // decompression latency
  double lambda_us = 9.2;        // base read, cache hit
  double delta_miss_us = 250.0;  // base read, cache miss
};

struct LatencyModel {
  LatencyParams params;
  const CacheStats* hr_source = nullptr;
  std::optional<double> forced_hr;

  double hr() const;
  double benefit(double spared_inline_bytes) const;
  double overhead() const;
};

// Outcome of try_replace, with the evaluated gate terms kept so a logged
// decision can be replayed bit-exactly.
struct ReplaceResult {
  bool replaced = false;
  DeltaEntry evicted;  // meaningful when replaced
  double spared_bytes = 0.0;
  double benefit = 0.0;
  double overhead = 0.0;
};

enum class InsertResult { Inserted, Full };

// A 4096-byte serialized inode. The 3692-byte inline region holds a
// reserved offset and the per-page data offsets at the head, the xattr
// region at the tail, and delta entries growing tail-to-head in between:
//
//   [reserved 4B][offsets 4B each ->][ free gap ][<- delta entries][xattr 200B]
//
// Each delta entry is (index: 2B, size: 1B, delta bytes), newest at the
// lowest address. On-flash layout:
//
//   0-7     magic "DFIN", ino u32 LE
//   8-11    flags (bit0 compress_tag, bits1-2 compress_type)
//   12-19   file_size u64 LE
//   20-23   mid u32 LE (0 = nil)
//   24-27   bgres_next u32 LE (0 = nil)
//   28-203  reserved
//   204-3895 inline region
//   3896-4095 crc32 of bytes 0-3895, zero padded
class InodeImage {
 public:
  static constexpr std::size_t kInlineBytes = 3692;
  static constexpr std::size_t kXattrBytes = 200;
  static constexpr std::size_t kReservedOffsetBytes = 4;
  static constexpr std::size_t kEntryHeaderBytes = 3;
  static constexpr std::size_t kMaxDeltaBytes = 255;

  struct InlineEntry {
    std::uint16_t page_index = 0;
    std::vector<std::uint8_t> bytes;
    std::size_t total() const { return bytes.size() + kEntryHeaderBytes; }
    bool operator==(const InlineEntry&) const = default;
  };

  InodeImage() = default;
  explicit InodeImage(InodeNum ino) : ino_(ino) {}

  InodeNum ino() const { return ino_; }
  bool compress_tag() const { return compress_tag_; }
  CompressType compress_type() const { return ctype_; }
  std::uint64_t file_size() const { return file_size_; }
  std::uint32_t page_count() const { return static_cast<std::uint32_t>(offsets_.size()); }

  Lba mid() const { return mid_; }          // 0 = nil
  bool has_mid() const { return mid_ != 0; }
  void set_mid(Lba lba) { mid_ = lba; dirty_ = true; }
  void clear_mid() { mid_ = 0; dirty_ = true; }

  InodeNum bgres_next() const { return bgres_next_; }  // 0 = nil
  void set_bgres_next(InodeNum ino) { bgres_next_ = ino; dirty_ = true; }

  Lba offset(std::uint32_t page_index) const { return offsets_.at(page_index); }
  void set_offset(std::uint32_t page_index, Lba lba) {
    offsets_.at(page_index) = lba;
    dirty_ = true;
  }
  const std::vector<Lba>& offsets() const { return offsets_; }

  const std::vector<InlineEntry>& entries() const { return entries_; }

  // 3692 - 4 (reserved) - 200 (xattr) - 4 * offsets - sum(entry totals).
  std::size_t free_space() const;

  // Appends the entry at the head of the delta region when it fits; Full
  // with no mutation otherwise. Throws OversizeDelta above 255 bytes. The
  // caller removes any stale entry for the page first.
  InsertResult insert_delta(std::uint32_t page_index, const DeltaPayload& payload);

  std::optional<DeltaPayload> lookup_delta(std::uint32_t page_index) const;

  // Removes the entry and compacts the region tail-ward. Returns whether an
  // entry was removed.
  bool remove_delta(std::uint32_t page_index);

  // Replacement arbiter for a candidate that did not fit. Evicts the
  // largest live entry when the modeled benefit of sparing its bytes
  // exceeds the modeled overhead of restoring its page.
  ReplaceResult try_replace(const DeltaEntry& candidate, const LatencyModel& model);

  // Grows the offset array to new_offset_count (and file_size with it),
  // removing and returning every delta entry the grown array would overlap.
  std::vector<DeltaEntry> evict_contending(std::uint32_t new_offset_count);

  // Recomputes compress_tag / compress_type from live state.
  void refresh_compress_state();

  Page serialize() const;
  static InodeImage parse(const Page& block);  // throws CorruptInode

  // Runtime-only flags.
  bool dirty() const { return dirty_; }
  void set_dirty(bool d) { dirty_ = d; }

  const std::array<std::uint8_t, kXattrBytes>& xattr() const { return xattr_; }
  std::array<std::uint8_t, kXattrBytes>& xattr() { return xattr_; }

  bool operator==(const InodeImage& o) const {
    return ino_ == o.ino_ && compress_tag_ == o.compress_tag_ && ctype_ == o.ctype_ &&
           file_size_ == o.file_size_ && mid_ == o.mid_ && bgres_next_ == o.bgres_next_ &&
           offsets_ == o.offsets_ && entries_ == o.entries_ && xattr_ == o.xattr_;
  }

 private:
  friend class LfsCore;

  InodeNum ino_ = 0;
  bool compress_tag_ = false;
  CompressType ctype_ = CompressType::None;
  std::uint64_t file_size_ = 0;
  Lba mid_ = 0;
  InodeNum bgres_next_ = 0;
  std::vector<Lba> offsets_;
  std::vector<InlineEntry> entries_;  // [0] oldest, nearest the xattr tail
  std::array<std::uint8_t, kXattrBytes> xattr_{};
  bool dirty_ = false;
};

}  // namespace deltafs
