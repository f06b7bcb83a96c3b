#include "deltafs/page_cache.hpp"

#include <algorithm>

#include "deltafs/errors.hpp"

namespace deltafs {

const CachedPage* PageCache::get(const PageKey& key, LookupClass cls) {
  auto it = pages_.find(key);
  if (it == pages_.end()) {
    if (cls == LookupClass::Data) ++stats_.data_misses;
    if (cls == LookupClass::Base) ++stats_.base_misses;
    return nullptr;
  }
  it->second.last_access = ++tick_;
  if (cls == LookupClass::Data) ++stats_.data_hits;
  if (cls == LookupClass::Base) ++stats_.base_hits;
  return &it->second;
}

const CachedPage* PageCache::peek(const PageKey& key) const {
  auto it = pages_.find(key);
  return it == pages_.end() ? nullptr : &it->second;
}

std::vector<PageKey> PageCache::insert(const PageKey& key, const Page& payload,
                                       PageState state) {
  CachedPage& slot = pages_[key];
  bool was_dirty = slot.state == PageState::Dirty && slot.dirty_seq != 0;
  slot.payload = payload;
  slot.state = state;
  slot.last_access = ++tick_;
  if (state == PageState::Dirty) {
    if (!was_dirty) slot.dirty_seq = ++dirty_seq_;
  } else {
    slot.dirty_seq = 0;
  }
  std::vector<PageKey> evicted;
  evict_over_capacity(evicted);
  return evicted;
}

void PageCache::evict_over_capacity(std::vector<PageKey>& evicted) {
  while (pages_.size() > capacity_) {
    auto victim = pages_.end();
    for (auto it = pages_.begin(); it != pages_.end(); ++it) {
      if (it->second.state != PageState::Clean) continue;
      if (victim == pages_.end() || it->second.last_access < victim->second.last_access) {
        victim = it;
      }
    }
    if (victim == pages_.end()) {
      throw CachePressure("cache over capacity with every page dirty");
    }
    evicted.push_back(victim->first);
    pages_.erase(victim);
  }
}

void PageCache::mark_dirty(const PageKey& key) {
  auto it = pages_.find(key);
  if (it == pages_.end()) throw Error("mark_dirty on uncached page");
  if (it->second.state == PageState::Dirty) return;
  it->second.state = PageState::Dirty;
  it->second.dirty_seq = ++dirty_seq_;
}

void PageCache::mark_clean(const PageKey& key) {
  auto it = pages_.find(key);
  if (it == pages_.end()) throw Error("mark_clean on uncached page");
  it->second.state = PageState::Clean;
  it->second.dirty_seq = 0;
}

std::vector<PageKey> PageCache::dirty_keys(std::optional<InodeNum> ino) const {
  std::vector<std::pair<std::uint64_t, PageKey>> order;
  for (const auto& [key, slot] : pages_) {
    if (slot.state != PageState::Dirty) continue;
    if (ino && key.ino != *ino) continue;
    order.emplace_back(slot.dirty_seq, key);
  }
  std::sort(order.begin(), order.end());
  std::vector<PageKey> out;
  out.reserve(order.size());
  for (auto& [seq, key] : order) out.push_back(key);
  return out;
}

std::vector<std::pair<PageKey, Page>> PageCache::flush_dirty(std::optional<InodeNum> ino) {
  std::vector<std::pair<PageKey, Page>> out;
  std::vector<std::pair<std::uint64_t, PageKey>> order;
  for (auto& [key, slot] : pages_) {
    if (slot.state != PageState::Dirty) continue;
    if (ino && key.ino != *ino) continue;
    order.emplace_back(slot.dirty_seq, key);
  }
  std::sort(order.begin(), order.end());
  out.reserve(order.size());
  for (auto& [seq, key] : order) {
    CachedPage& slot = pages_[key];
    out.emplace_back(key, slot.payload);
    slot.state = PageState::Clean;
    slot.dirty_seq = 0;
  }
  return out;
}

bool PageCache::erase(const PageKey& key) { return pages_.erase(key) != 0; }

void PageCache::drop_ino(InodeNum ino) {
  for (auto it = pages_.begin(); it != pages_.end();) {
    if (it->first.ino == ino) {
      it = pages_.erase(it);
    } else {
      ++it;
    }
  }
}

void PageCache::clear() {
  pages_.clear();
  inodes_.clear();
  tick_ = 0;
  dirty_seq_ = 0;
}

InodeImage* PageCache::inode_get(InodeNum ino) {
  auto it = inodes_.find(ino);
  if (it == inodes_.end()) {
    ++stats_.inode_misses;
    return nullptr;
  }
  ++stats_.inode_hits;
  return &it->second;
}

InodeImage& PageCache::inode_put(InodeImage inode) {
  InodeNum ino = inode.ino();
  return inodes_.insert_or_assign(ino, std::move(inode)).first->second;
}

bool PageCache::inode_erase(InodeNum ino) { return inodes_.erase(ino) != 0; }

}  // namespace deltafs
