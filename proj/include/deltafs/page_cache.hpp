#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "deltafs/inline_store.hpp"
#include "deltafs/types.hpp"

namespace deltafs {

struct PageKey {
  InodeNum ino = 0;
  std::uint32_t page_index = 0;
  auto operator<=>(const PageKey&) const = default;
};

enum class PageState : std::uint8_t { Clean, Dirty };

struct CachedPage {
  Page payload{};
  PageState state = PageState::Clean;
  std::uint64_t last_access = 0;
  std::uint64_t dirty_seq = 0;  // order the page first became dirty
};

struct CacheStats {
  std::uint64_t data_hits = 0;
  std::uint64_t data_misses = 0;
  std::uint64_t inode_hits = 0;
  std::uint64_t inode_misses = 0;
  std::uint64_t base_hits = 0;
  std::uint64_t base_misses = 0;

  // Base hit rate feeding the replacement overhead formula. Defined as 1.0
  // before any base lookup occurred.
  double base_hit_rate() const {
    std::uint64_t n = base_hits + base_misses;
    return n == 0 ? 1.0 : static_cast<double>(base_hits) / static_cast<double>(n);
  }
  double data_hit_rate() const {
    std::uint64_t n = data_hits + data_misses;
    return n == 0 ? 1.0 : static_cast<double>(data_hits) / static_cast<double>(n);
  }
  double inode_hit_rate() const {
    std::uint64_t n = inode_hits + inode_misses;
    return n == 0 ? 1.0 : static_cast<double>(inode_hits) / static_cast<double>(n);
  }
};

// Counter class a lookup charges: file data reads vs Base acquisitions.
enum class LookupClass { Data, Base, None };

// In-memory page cache for file data plus a separate unbounded inode map.
// Eviction is LRU over clean pages only; a dirty page is never dropped
// before it is flushed. Pages compressed by the delta paths stay clean.
class PageCache {
 public:
  explicit PageCache(std::size_t capacity_pages) : capacity_(capacity_pages) {}

  // Hit: bumps recency and the hit counter of cls, returns the page.
  // Miss: bumps the miss counter of cls, returns nullptr.
  const CachedPage* get(const PageKey& key, LookupClass cls);

  // No recency bump, no counters.
  const CachedPage* peek(const PageKey& key) const;

  // Upserts the page (payload and state both replaced) and evicts
  // least-recently-used clean pages while over capacity. Returns the evicted
  // keys. Throws CachePressure when over capacity with every page dirty.
  std::vector<PageKey> insert(const PageKey& key, const Page& payload, PageState state);

  // Marks a cached page dirty without touching recency.
  void mark_dirty(const PageKey& key);
  void mark_clean(const PageKey& key);

  // Keys of dirty pages in dirty order, optionally restricted to one file.
  std::vector<PageKey> dirty_keys(std::optional<InodeNum> ino = {}) const;

  // Returns all dirty pages in the order they first became dirty and marks
  // them clean. With `ino` set, restricted to that file.
  std::vector<std::pair<PageKey, Page>> flush_dirty(std::optional<InodeNum> ino = {});

  bool erase(const PageKey& key);
  void drop_ino(InodeNum ino);
  void clear();

  std::size_t size() const { return pages_.size(); }
  std::size_t capacity() const { return capacity_; }
  void set_capacity(std::size_t c) { capacity_ = c; }

  CacheStats& stats() { return stats_; }
  const CacheStats& stats() const { return stats_; }

  // Inode cache: unbounded, pinned until erased. Mirrors the near-100%
  // inode hit rates of the workloads being modeled.
  InodeImage* inode_get(InodeNum ino);
  InodeImage& inode_put(InodeImage inode);
  bool inode_erase(InodeNum ino);
  std::map<InodeNum, InodeImage>& inodes() { return inodes_; }
  const std::map<InodeNum, InodeImage>& inodes() const { return inodes_; }

 private:
  void evict_over_capacity(std::vector<PageKey>& evicted);

  std::size_t capacity_;
  std::map<PageKey, CachedPage> pages_;
  std::map<InodeNum, InodeImage> inodes_;
  CacheStats stats_;
  std::uint64_t tick_ = 0;
  std::uint64_t dirty_seq_ = 0;
};

}  // namespace deltafs
