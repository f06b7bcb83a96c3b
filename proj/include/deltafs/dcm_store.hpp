#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "deltafs/block_device.hpp"
#include "deltafs/delta_codec.hpp"
#include "deltafs/hotness.hpp"
#include "deltafs/inline_store.hpp"
#include "deltafs/types.hpp"

namespace deltafs {

class PageCache;

// One compact-block descriptor inside a meta-block:
//   [compact_lba: 4B][CN: 1B][FS: 2B][CN x (PI: 4B, DO: 2B)]
// DO points at the size field of a delta entry inside the compact block.
struct CompactDescriptor {
  Lba compact_lba = 0;
  std::uint16_t free_space = 0;
  std::vector<std::pair<std::uint32_t, std::uint16_t>> pairs;  // (PI, DO)

  std::size_t wire_size() const { return 7 + 6 * pairs.size(); }
  bool operator==(const CompactDescriptor&) const = default;
};

// Per-file meta-block: descriptor sequence terminated by a 4-byte zero lba.
struct MetaImage {
  std::vector<CompactDescriptor> descriptors;

  std::size_t wire_size() const;
  bool fits(std::size_t extra_bytes) const { return wire_size() + extra_bytes <= kBlockSize; }
  Page serialize() const;
  static MetaImage parse(const Page& block);  // throws CorruptMapping

  std::size_t delta_count() const;
  bool operator==(const MetaImage&) const = default;
};

// Maintains overflow delta chunks in main-data-area compact blocks. Compact
// blocks pack entries as [size: 2B LE][delta bytes] head-to-tail and are
// written the moment they are built; the meta-block (its lba recorded as MID
// in the inode) is pinned and updated in place so the mapping stays durable
// without an inode rewrite per change.
class DcmStore {
 public:
  DcmStore(BlockDevice& dev, const Compressor& codec, int threshold = 5)
      : dev_(dev), codec_(codec), threshold_(threshold) {}

  int threshold() const { return threshold_; }

  // Compaction gate: write-hot-read-cold file, at least `threshold` pending
  // entries, and the packed entries fit one block.
  bool should_compact(const std::vector<DeltaEntry>& pending, HotnessClass hotness) const;

  // Packs the pending entries into a fresh compact block, writes it, and
  // appends its descriptor to the file's meta-block (allocated and recorded
  // as MID on first use). Returns true when this call created the
  // meta-block (the caller must then flush the inode so MID is durable).
  // Throws MetaFull with no mutation when the descriptor does not fit.
  bool compact(InodeImage& inode, const std::vector<DeltaEntry>& pending);

  // A delta evicted from the inline area by offset growth. Appends it to
  // the newest compact block with room; otherwise creates a block for it if
  // the hotness gate passes. Returns false (no mutation) when the entry was
  // not placed; out.created_meta mirrors compact()'s return.
  struct AcceptResult {
    bool placed = false;
    bool created_meta = false;
  };
  AcceptResult accept_evicted(InodeImage& inode, const DeltaEntry& entry, HotnessClass hotness);

  std::optional<DeltaPayload> lookup(const InodeImage& inode, std::uint32_t page_index) const;

  // Drops the mapping pair for the page (the compact block keeps the dead
  // bytes until the file is restored). Empty compact blocks are
  // invalidated; an empty meta-block is invalidated and MID cleared, in
  // which case cleared_meta is set and the caller flushes the inode.
  struct RemoveResult {
    bool removed = false;
    bool cleared_meta = false;
  };
  RemoveResult remove(InodeImage& inode, std::uint32_t page_index);

  // Decompresses every mapped page of the file into the cache as dirty,
  // invalidates the file's compact blocks and meta-block, clears MID, and
  // downgrades compress_type. Returns the number of restored pages.
  std::size_t restore_file(InodeImage& inode, PageCache& cache);

  std::size_t delta_count(const InodeImage& inode) const;

  MetaImage read_meta(const InodeImage& inode) const;

 private:
  void write_meta(InodeImage& inode, const MetaImage& meta, bool& created);
  DeltaPayload read_entry(const Page& compact, std::uint16_t offset) const;

  BlockDevice& dev_;
  const Compressor& codec_;
  int threshold_;
};

}  // namespace deltafs
