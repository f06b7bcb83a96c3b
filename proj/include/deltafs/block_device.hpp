#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deltafs/types.hpp"

namespace deltafs {

enum class BlockState : std::uint8_t { Free = 0, Valid = 1, Invalid = 2 };

// Simulated flash-backed logical address space. Writes append to the active
// log segment; a logical overwrite must allocate a fresh LBA and invalidate
// the old one (caller contract). Segment cleaning relocates the victim's
// valid blocks to the active log and reports each move through the
// relocation callback so the file system can patch its pointers.
class BlockDevice {
 public:
  using RelocateFn = std::function<void(Lba old_lba, Lba new_lba)>;

  BlockDevice(std::uint32_t segment_count, std::uint32_t blocks_per_segment = 512);

  // Stores payload at the lowest free LBA of the active log segment,
  // opening the lowest fully-free segment when the active one fills.
  // Cleans a segment first if no free block is available; throws DeviceFull
  // when cleaning cannot help.
  Lba alloc_and_write(const Page& payload);

  // Throws InvalidRead unless lba is valid.
  Page read(Lba lba) const;

  // Valid -> Invalid. Throws InvalidState otherwise.
  void invalidate(Lba lba);

  // Picks the segment with the most invalid blocks (ties: lowest index),
  // relocates its valid blocks to the active log, erases it. Returns the
  // number of blocks freed (the victim's invalid count). Throws
  // NothingToClean when no cleanable segment holds an invalid block.
  std::size_t clean_segment();

  // In-place rewrite of a pinned block (superblock / meta-blocks). The
  // out-of-place contract does not apply to pinned LBAs.
  void overwrite(Lba lba, const Page& payload);

  // Pinned blocks are never relocated; segments holding a pinned valid
  // block are skipped by victim selection.
  void pin(Lba lba) { pinned_.insert(lba); }
  void unpin(Lba lba) { pinned_.erase(lba); }
  bool is_pinned(Lba lba) const { return pinned_.count(lba) != 0; }

  void set_relocate_callback(RelocateFn fn) { on_relocate_ = std::move(fn); }

  BlockState state(Lba lba) const;
  std::uint32_t segment_count() const { return segment_count_; }
  std::uint32_t blocks_per_segment() const { return blocks_per_segment_; }
  std::uint64_t capacity_blocks() const {
    return std::uint64_t(segment_count_) * blocks_per_segment_;
  }

  std::uint64_t write_count() const { return write_count_; }
  std::uint64_t read_count() const { return read_count_; }
  std::uint64_t erase_count() const { return erase_count_; }

  std::size_t valid_blocks() const { return count_state(BlockState::Valid); }
  std::size_t invalid_blocks() const { return count_state(BlockState::Invalid); }
  std::size_t free_blocks() const { return count_state(BlockState::Free); }

  // Per-LBA write stamp (session-local, 0 for blocks loaded from an image).
  // Within a segment stamps increase with LBA; checked by tests and fsck.
  std::uint64_t write_stamp(Lba lba) const;

  // Flat image: 16-byte header (magic "DFSIMG01", block_size u32 LE,
  // segment_count u32 LE), raw blocks, then a validity bitmap with 2 bits
  // per block.
  void save(const std::string& path) const;
  static BlockDevice load(const std::string& path);

 private:
  Lba try_place(const Page& payload);
  std::optional<std::uint32_t> pick_victim() const;
  std::size_t count_state(BlockState s) const;
  void erase_segment(std::uint32_t seg);

  std::uint32_t segment_count_;
  std::uint32_t blocks_per_segment_;
  std::vector<BlockState> states_;
  std::vector<std::uint64_t> stamps_;
  std::map<Lba, Page> payloads_;
  std::set<Lba> pinned_;

  std::optional<std::uint32_t> active_segment_;
  std::uint32_t active_offset_ = 0;

  std::uint64_t write_count_ = 0;
  mutable std::uint64_t read_count_ = 0;
  std::uint64_t erase_count_ = 0;
  std::uint64_t stamp_counter_ = 0;

  RelocateFn on_relocate_;
};

}  // namespace deltafs
