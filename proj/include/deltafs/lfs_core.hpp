#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "deltafs/block_device.hpp"
#include "deltafs/dcm_store.hpp"
#include "deltafs/delta_codec.hpp"
#include "deltafs/hotness.hpp"
#include "deltafs/inline_store.hpp"
#include "deltafs/page_cache.hpp"
#include "deltafs/types.hpp"

namespace deltafs {

struct FsConfig {
  std::size_t cache_pages = 4096;
  LatencyParams latency;
  std::optional<double> forced_hr;
  std::uint64_t hcluster_window = 60000;
  std::uint64_t hcluster_seed = 0x5eed;
  int dcm_threshold = 5;
  std::size_t bgres_budget = 64;
  bool compress = true;
};

struct DeviceGeometry {
  std::uint32_t segment_count = 64;
  std::uint32_t blocks_per_segment = 512;
};

// Superblock, pinned at LBA 0 and rewritten in place. Holds the namespace
// root, the BGRes list head, and a geometry echo.
struct Superblock {
  std::uint32_t next_ino = 1;
  InodeNum bgres_head = 0;  // 0 = nil
  Lba dir_head = 0;         // 0 = nil
  std::uint32_t dir_blocks = 0;
  std::uint32_t segment_count = 0;
  std::uint32_t blocks_per_segment = 0;

  Page serialize() const;
  static Superblock parse(const Page& block);  // throws CorruptInode
};

enum class WriteOutcome : std::uint8_t {
  CompressedInline,
  CompressedMain,
  PlainDirty,
  Appended,
};

const char* outcome_name(WriteOutcome o);

struct FileHandle {
  InodeNum ino = 0;
  std::string path;
};

struct RecoveryReport {
  std::size_t inodes_recovered = 0;
  std::size_t files_recovered = 0;
  std::size_t compressed_pages_verified = 0;
  // (path, page_index, reason) triples for pages that cannot be rebuilt
  // from the image. Empty when the consistency contract held.
  std::vector<std::tuple<std::string, std::uint32_t, std::string>> unrecoverable;
};

struct ConsistencyReport {
  std::vector<std::string> violations;
  bool clean() const { return violations.empty(); }
};

// Modeled-latency accounting. Every operation adds its latency-model term;
// restoring an evicted delta adds a stall of gamma + epsilon + the base
// fetch term (lambda on cache hit, delta_miss otherwise). Background
// restoration is free: it runs in idle time.
struct ModelAccounting {
  double total_us = 0;
  std::vector<double> eviction_stalls_us;
  std::uint64_t compressed_inline = 0;
  std::uint64_t compressed_main = 0;
  std::uint64_t plain_dirty = 0;
  std::uint64_t appended = 0;
  std::uint64_t reads = 0;
  std::uint64_t bgres_restored_pages = 0;

  void count(WriteOutcome o);
};

// The file system facade. Single-threaded; callers serialize all access.
// Crash points are between public operations.
class LfsCore {
 public:
  // Fresh file system over a new device.
  LfsCore(const DeviceGeometry& geom, const FsConfig& config);
  // Mount an existing device image.
  LfsCore(BlockDevice device, const FsConfig& config);

  LfsCore(const LfsCore&) = delete;
  LfsCore& operator=(const LfsCore&) = delete;

  FileHandle create(const std::string& path);
  FileHandle open(const std::string& path) const;
  bool exists(const std::string& path) const { return names_.count(path) != 0; }
  void remove(const std::string& path);

  WriteOutcome write_page(const FileHandle& h, std::uint32_t page_index, const Page& data);
  Page read_page(const FileHandle& h, std::uint32_t page_index);

  // Reconstructs current page content without touching cache recency,
  // counters, or hotness. Used by the trace replayer and tests.
  Page peek_page(const FileHandle& h, std::uint32_t page_index) const;

  std::uint64_t file_size(const FileHandle& h) const;

  // Writes dirty pages out-of-place (invalidating old LBAs, patching
  // offsets), then dirty inodes. Returns data + inode blocks written;
  // namespace and superblock writes are not counted.
  std::size_t fsync(const FileHandle& h);
  std::size_t flush_all();

  // Walks up to `budget` files from the BGRes list head: read-hot files and
  // files with fewer than `dcm_threshold` main-area chunks are restored and
  // unlinked. Returns restored file count.
  std::size_t run_bgres(std::size_t budget);

  // Idle-time cleaning pass: frees one segment if space pressure warrants
  // it, then checkpoints relocation patches.
  std::size_t idle_clean();

  // Drops every volatile structure and rebuilds from the device image.
  RecoveryReport crash_and_recover();

  ConsistencyReport fsck() const;

  void advance_clock(std::uint64_t tick);
  std::uint64_t clock() const { return clock_; }

  void save(const std::string& path);
  static std::unique_ptr<LfsCore> mount(const std::string& path, const FsConfig& config);

  BlockDevice& device() { return dev_; }
  const BlockDevice& device() const { return dev_; }
  PageCache& cache() { return cache_; }
  const PageCache& cache() const { return cache_; }
  HotnessTracker& hotness() { return hotness_; }
  const ModelAccounting& accounting() const { return acct_; }
  const FsConfig& config() const { return config_; }
  const LatencyModel& latency_model() const { return model_; }
  const Superblock& superblock() const { return super_; }

  std::size_t inline_delta_count() const;
  std::size_t dcm_delta_count() const;
  std::vector<std::pair<std::string, InodeNum>> list_files() const;

 private:
  InodeImage& inode(InodeNum ino);
  const InodeImage& inode(InodeNum ino) const;

  // Live delta for a page, wherever it is held. Search order: the in-memory
  // pending set, the inline area, then the main area.
  std::optional<DeltaPayload> find_live_delta(const InodeImage& ind, std::uint32_t idx) const;
  bool remove_live_delta(InodeImage& ind, std::uint32_t idx);

  void restore_evicted_page(InodeImage& ind, const DeltaEntry& entry);
  void materialize_dirty(InodeImage& ind, const DeltaEntry& entry);
  void route_contended(InodeImage& ind, const DeltaEntry& entry);
  WriteOutcome route_rejected(InodeImage& ind, std::uint32_t idx, const Page& data,
                              DeltaEntry candidate);

  std::size_t flush_pages(std::optional<InodeNum> ino);
  std::size_t flush_inode(InodeImage& ind);
  std::size_t flush_dirty_inodes(std::optional<InodeNum> ino);
  void make_inode_durable(InodeImage& ind);
  void persist_namespace();
  void persist_superblock();

  void bgres_link(InodeImage& ind);
  void bgres_unlink(InodeImage& ind, InodeNum prev);

  void format();
  void recover_state();
  Lba alloc_block(const Page& payload);
  void on_relocate(Lba old_lba, Lba new_lba);
  void apply_relocations();
  void drain_relocations();
  void checkpoint_if_needed();

  void charge(double us) { acct_.total_us += us; }

  FsConfig config_;
  BlockDevice dev_;
  PageCache cache_;
  HotnessTracker hotness_;
  ZeroRleCodec codec_;
  DcmStore dcm_;
  LatencyModel model_;

  Superblock super_;
  bool super_dirty_ = false;
  std::map<std::string, InodeNum> names_;
  bool names_dirty_ = false;
  std::vector<Lba> dir_lbas_;
  std::map<InodeNum, Lba> inode_lba_;  // kNullLba when never flushed
  std::map<InodeNum, std::vector<DeltaEntry>> pending_;
  std::vector<std::pair<Lba, Lba>> reloc_journal_;
  bool reloc_dirty_ = false;

  std::uint64_t clock_ = 0;
  ModelAccounting acct_;
};

}  // namespace deltafs
