// Brute-force reference model used by the harness tests and the acceptance
// suite. It replays a trace against flat in-memory structures (content maps,
// a linear-scan LRU, plain counters) and predicts the write-outcome sequence
// and the exact number of flash block writes, independently of the real
// device, cache, and serialization code. The delta codec is shared: its own
// behavior is property-tested separately.
#pragma once

#include <algorithm>
#include <cassert>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "deltafs/delta_codec.hpp"
#include "deltafs/lfs_core.hpp"
#include "deltafs/trace.hpp"

namespace deltafs::oracle {

// ---------------------------------------------------------------------------
// Hotness model: windowed counts + kmeans++ with the same draw protocol.

class OracleHotness {
 public:
  OracleHotness(std::uint64_t window, std::uint64_t seed) : window_(window), rng_(seed) {}

  void record(InodeNum ino, bool is_write, std::uint64_t tick) {
    auto& q = events_[ino];
    q.emplace_back(tick, is_write);
    while (!q.empty() && tick >= window_ && q.front().first <= tick - window_) q.pop_front();
  }

  void forget(InodeNum ino) { events_.erase(ino); }

  std::pair<double, double> counts(InodeNum ino, std::uint64_t now) const {
    auto it = events_.find(ino);
    double r = 0, w = 0;
    if (it != events_.end()) {
      for (const auto& [tick, is_write] : it->second) {
        if (now >= window_ && tick <= now - window_) continue;
        (is_write ? w : r) += 1;
      }
    }
    return {r, w};
  }

  HotnessClass classify(InodeNum ino, std::uint64_t now) {
    if (!has_state_ || now - built_at_ > window_ / 2) rebuild(ino, now);
    auto [r, w] = counts(ino, now);
    int best = 0;
    double best_d = dist2(centroids_[0], r, w);
    for (int c = 1; c < 4; ++c) {
      double d = dist2(centroids_[c], r, w);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return labels_[best];
  }

 private:
  static double dist2(const std::array<double, 2>& c, double r, double w) {
    double dr = c[0] - r, dw = c[1] - w;
    return dr * dr + dw * dw;
  }
  static double unit(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

  void rebuild(InodeNum include, std::uint64_t now) {
    struct Pt {
      InodeNum ino;
      double r, w;
    };
    std::vector<Pt> pts;
    bool present = false;
    for (const auto& [ino, q] : events_) {
      auto [r, w] = counts(ino, now);
      pts.push_back({ino, r, w});
      present = present || ino == include;
    }
    if (!present) {
      auto [r, w] = counts(include, now);
      pts.push_back({include, r, w});
    }
    std::mt19937_64 g(rng_());
    const std::size_t n = pts.size();

    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::size_t first = g() % n;
    centroids_[0] = {pts[first].r, pts[first].w};
    for (int c = 1; c < 4; ++c) {
      double total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = dist2(centroids_[c - 1], pts[i].r, pts[i].w);
        min_d[i] = std::min(min_d[i], d);
        total += min_d[i];
      }
      std::size_t pick;
      if (total <= 0) {
        pick = g() % n;
      } else {
        double u = unit(g) * total;
        double acc = 0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += min_d[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
      }
      centroids_[c] = {pts[pick].r, pts[pick].w};
    }

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = dist2(centroids_[0], pts[i].r, pts[i].w);
        for (int c = 1; c < 4; ++c) {
          double d = dist2(centroids_[c], pts[i].r, pts[i].w);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        if (best != assign[i]) {
          assign[i] = best;
          changed = true;
        }
      }
      if (!changed) break;
      std::array<std::array<double, 2>, 4> sums{};
      std::array<std::size_t, 4> cnt{};
      for (std::size_t i = 0; i < n; ++i) {
        sums[assign[i]][0] += pts[i].r;
        sums[assign[i]][1] += pts[i].w;
        ++cnt[assign[i]];
      }
      for (int c = 0; c < 4; ++c) {
        if (cnt[c]) centroids_[c] = {sums[c][0] / cnt[c], sums[c][1] / cnt[c]};
      }
    }

    double mean_r = 0, mean_w = 0;
    for (const auto& p : pts) {
      mean_r += p.r;
      mean_w += p.w;
    }
    mean_r /= double(n);
    mean_w /= double(n);
    for (int c = 0; c < 4; ++c) {
      bool rh = centroids_[c][0] >= mean_r;
      bool wh = centroids_[c][1] >= mean_w;
      labels_[c] = static_cast<HotnessClass>((rh ? 2 : 0) | (wh ? 1 : 0));
    }
    built_at_ = now;
    has_state_ = true;
  }

  std::uint64_t window_;
  std::mt19937_64 rng_;
  std::map<InodeNum, std::deque<std::pair<std::uint64_t, bool>>> events_;
  std::array<std::array<double, 2>, 4> centroids_{};
  std::array<HotnessClass, 4> labels_{};
  std::uint64_t built_at_ = 0;
  bool has_state_ = false;
};

// ---------------------------------------------------------------------------
// LRU cache model: linear scans over a flat map.

struct OCacheSlot {
  Page payload{};
  bool dirty = false;
  std::uint64_t last = 0;
};

class OracleCache {
 public:
  explicit OracleCache(std::size_t capacity) : capacity_(capacity) {}

  const OCacheSlot* peek(const PageKey& k) const {
    auto it = slots_.find(k);
    return it == slots_.end() ? nullptr : &it->second;
  }
  OCacheSlot* get(const PageKey& k) {  // bumps recency on hit
    auto it = slots_.find(k);
    if (it == slots_.end()) return nullptr;
    it->second.last = ++tick_;
    return &it->second;
  }
  void insert(const PageKey& k, const Page& p, bool dirty) {
    OCacheSlot& s = slots_[k];
    s.payload = p;
    s.dirty = dirty;
    s.last = ++tick_;
    while (slots_.size() > capacity_) {
      auto victim = slots_.end();
      for (auto it = slots_.begin(); it != slots_.end(); ++it) {
        if (it->second.dirty) continue;
        if (victim == slots_.end() || it->second.last < victim->second.last) victim = it;
      }
      if (victim == slots_.end()) throw std::runtime_error("oracle cache pressure");
      slots_.erase(victim);
    }
  }
  void mark_dirty(const PageKey& k) { slots_.at(k).dirty = true; }
  void drop_ino(InodeNum ino) {
    for (auto it = slots_.begin(); it != slots_.end();) {
      it = it->first.ino == ino ? slots_.erase(it) : std::next(it);
    }
  }
  std::map<PageKey, OCacheSlot>& slots() { return slots_; }

 private:
  std::size_t capacity_;
  std::map<PageKey, OCacheSlot> slots_;
  std::uint64_t tick_ = 0;
};

// ---------------------------------------------------------------------------
// The file system model.

class OracleFs {
 public:
  OracleFs(const FsConfig& cfg, bool compress)
      : cfg_(cfg),
        compress_(compress),
        cache_(cfg.cache_pages),
        hotness_(cfg.hcluster_window, cfg.hcluster_seed) {}

  std::uint64_t writes() const { return writes_; }
  const std::vector<WriteOutcome>& outcomes() const { return outcomes_; }
  std::uint64_t base_hits() const { return base_hits_; }
  std::uint64_t base_misses() const { return base_misses_; }

  void apply(const TraceRecord& r) {
    clock_ = std::max(clock_, r.tick);
    switch (r.op) {
      case TraceRecord::Op::Create: do_create(r.path); break;
      case TraceRecord::Op::Write: do_write(r); break;
      case TraceRecord::Op::Read: do_read(r); break;
      case TraceRecord::Op::Fsync:
        if (r.path.empty()) {
          do_flush(std::nullopt);
        } else {
          do_flush(files_.at(r.path).ino);
        }
        break;
      case TraceRecord::Op::Delete: do_delete(r.path); break;
      case TraceRecord::Op::Idle: do_bgres(cfg_.bgres_budget); break;
    }
  }

  Page content(const std::string& path, std::uint32_t idx) const {
    return files_.at(path).latest.at(idx);
  }

 private:
  struct ODesc {
    std::size_t free_space = kBlockSize;
    std::vector<std::pair<std::uint32_t, std::size_t>> pairs;  // (page, delta size)
    std::size_t wire_size() const { return 7 + 6 * pairs.size(); }
  };
  struct OFile {
    InodeNum ino = 0;
    std::string path;
    std::vector<Page> latest;
    std::vector<Page> base;           // flash content per page
    std::vector<bool> has_flash;      // offset assigned
    std::vector<std::pair<std::uint32_t, std::size_t>> inline_entries;  // oldest first
    std::vector<std::pair<std::uint32_t, std::size_t>> pending;
    std::vector<ODesc> descs;
    bool has_mid = false;
    bool inode_dirty = false;
    bool in_bgres = false;
  };

  OFile& file_of(InodeNum ino) {
    for (auto& [path, f] : files_) {
      if (f.ino == ino) return f;
    }
    throw std::runtime_error("oracle: unknown ino");
  }

  std::size_t free_space(const OFile& f) const {
    std::size_t used = 4 + 200 + 4 * f.latest.size();
    for (const auto& [idx, size] : f.inline_entries) used += size + 3;
    return used > InodeImage::kInlineBytes ? 0 : InodeImage::kInlineBytes - used;
  }

  std::size_t dcm_count(const OFile& f) const {
    std::size_t n = 0;
    for (const auto& d : f.descs) n += d.pairs.size();
    return n;
  }

  std::size_t meta_wire(const OFile& f) const {
    std::size_t s = 4;
    for (const auto& d : f.descs) s += d.wire_size();
    return s;
  }

  bool has_live_delta(const OFile& f, std::uint32_t idx) const {
    for (const auto& [i, s] : f.pending) {
      if (i == idx) return true;
    }
    for (const auto& [i, s] : f.inline_entries) {
      if (i == idx) return true;
    }
    for (const auto& d : f.descs) {
      for (const auto& [i, s] : d.pairs) {
        if (i == idx) return true;
      }
    }
    return false;
  }

  // Mirrors remove_live_delta: pending, then inline, then main.
  void remove_live_delta(OFile& f, std::uint32_t idx) {
    for (auto it = f.pending.begin(); it != f.pending.end(); ++it) {
      if (it->first == idx) {
        f.pending.erase(it);
        return;
      }
    }
    for (auto it = f.inline_entries.begin(); it != f.inline_entries.end(); ++it) {
      if (it->first == idx) {
        f.inline_entries.erase(it);
        f.inode_dirty = true;
        return;
      }
    }
    for (auto dit = f.descs.begin(); dit != f.descs.end(); ++dit) {
      for (auto pit = dit->pairs.begin(); pit != dit->pairs.end(); ++pit) {
        if (pit->first != idx) continue;
        dit->pairs.erase(pit);
        bool cleared = false;
        if (dit->pairs.empty()) {
          f.descs.erase(dit);
        }
        if (f.descs.empty()) {
          f.has_mid = false;
          cleared = true;
        }
        f.inode_dirty = true;
        if (cleared) {
          bgres_unlink_and_flush(f);
        } else {
          writes_ += 1;  // meta overwrite
        }
        return;
      }
    }
  }

  void bgres_unlink(OFile& f) {
    auto it = std::find(bgres_.begin(), bgres_.end(), f.ino);
    if (it == bgres_.end()) {
      f.in_bgres = false;
      return;
    }
    if (it == bgres_.begin()) {
      super_dirty_ = true;
    } else {
      OFile& prev = file_of(*std::prev(it));
      prev.inode_dirty = true;
    }
    f.inode_dirty = true;  // bgres_next cleared
    bgres_.erase(it);
    f.in_bgres = false;
  }

  // The cleared-MID path: unlink, flush this inode and a dirtied
  // predecessor immediately, persist the superblock if the head moved.
  void bgres_unlink_and_flush(OFile& f) {
    auto it = std::find(bgres_.begin(), bgres_.end(), f.ino);
    InodeNum prev_ino = 0;
    if (it != bgres_.end() && it != bgres_.begin()) prev_ino = *std::prev(it);
    bgres_unlink(f);
    make_inode_durable(f);
    if (prev_ino != 0) {
      OFile& prev = file_of(prev_ino);
      if (prev.inode_dirty) flush_inode(prev);
    }
    if (super_dirty_) {
      writes_ += 1;
      super_dirty_ = false;
    }
  }

  // Mirrors flush_inode: unflushed appends first, then the inode block.
  void flush_inode(OFile& f) {
    for (std::uint32_t i = 0; i < f.latest.size(); ++i) {
      if (f.has_flash[i]) continue;
      PageKey key{f.ino, i};
      const OCacheSlot* s = cache_.peek(key);
      if (!s || !s->dirty) continue;
      writes_ += 1;
      f.has_flash[i] = true;
      f.base[i] = s->payload;
      cache_.slots().at(key).dirty = false;
    }
    writes_ += 1;  // the inode itself
    f.inode_dirty = false;
  }

  // Mirrors make_inode_durable: inode flush plus namespace/superblock.
  void make_inode_durable(OFile& f) {
    flush_inode(f);
    if (names_dirty_) {
      writes_ += dir_chunks();
      names_dirty_ = false;
      writes_ += 1;  // superblock via namespace persist
      super_dirty_ = false;
    }
    if (super_dirty_) {
      writes_ += 1;
      super_dirty_ = false;
    }
  }

  void restore_evicted(OFile& f, std::uint32_t idx) {
    PageKey key{f.ino, idx};
    if (cache_.peek(key)) {
      ++base_hits_;
      cache_.mark_dirty(key);
    } else {
      ++base_misses_;
      cache_.insert(key, f.latest[idx], true);
    }
  }

  void compact_pending(OFile& f) {
    // Pre-checked by should_compact; MetaFull guard mirrors the real path.
    ODesc desc;
    std::size_t packed = 0;
    for (const auto& [idx, size] : f.pending) {
      desc.pairs.emplace_back(idx, size);
      packed += size + 2;
    }
    desc.free_space = kBlockSize - packed;
    if (meta_wire(f) + desc.wire_size() > kBlockSize) throw std::runtime_error("oracle MetaFull");
    writes_ += 1;  // compact block
    bool created = !f.has_mid;
    f.has_mid = true;
    writes_ += 1;  // meta write (alloc or in-place)
    f.descs.push_back(std::move(desc));
    f.pending.clear();
    f.inode_dirty = true;
    if (created) {
      bgres_.insert(bgres_.begin(), f.ino);
      f.in_bgres = true;
      super_dirty_ = true;
      make_inode_durable(f);
    }
  }

  void route_contended(OFile& f, std::uint32_t idx, std::size_t size) {
    HotnessClass cls = hotness_.classify(f.ino, clock_);
    // accept_evicted mirror: newest block with room, else create under the
    // hotness gate.
    for (auto it = f.descs.rbegin(); it != f.descs.rend(); ++it) {
      if (it->free_space < size + 2 || it->pairs.size() >= 255) continue;
      writes_ += 2;  // compact rewrite + meta update
      it->pairs.emplace_back(idx, size);
      it->free_space -= size + 2;
      f.inode_dirty = true;
      return;
    }
    if (cls == HotnessClass::ReadColdWriteHot && meta_wire(f) + 13 <= kBlockSize) {
      ODesc desc;
      desc.pairs.emplace_back(idx, size);
      desc.free_space = kBlockSize - (size + 2);
      writes_ += 1;  // compact block
      bool created = !f.has_mid;
      f.has_mid = true;
      writes_ += 1;  // meta write
      f.descs.push_back(std::move(desc));
      f.inode_dirty = true;
      if (created) {
        bgres_.insert(bgres_.begin(), f.ino);
        f.in_bgres = true;
        super_dirty_ = true;
        make_inode_durable(f);
      }
      return;
    }
    restore_evicted(f, idx);
  }

  void do_create(const std::string& path) {
    OFile f;
    f.ino = next_ino_++;
    f.path = path;
    f.inode_dirty = true;
    files_.emplace(path, std::move(f));
    names_dirty_ = true;
    super_dirty_ = true;
  }

  void do_write(const TraceRecord& r) {
    OFile& f = files_.at(r.path);
    hotness_.record(f.ino, true, clock_);
    std::uint32_t count = static_cast<std::uint32_t>(f.latest.size());
    PageKey key{f.ino, r.page_index};

    if (r.page_index == count) {  // append
      std::optional<Page> none;
      Page payload = materialize_payload(r, none);
      // evict_contending mirror: pop newest until the grown array fits.
      std::size_t needed = 4 + 200 + 4 * std::size_t(count + 1);
      auto entry_bytes = [&f] {
        std::size_t s = 0;
        for (const auto& [i, sz] : f.inline_entries) s += sz + 3;
        return s;
      };
      std::vector<std::pair<std::uint32_t, std::size_t>> contended;
      while (needed + entry_bytes() > InodeImage::kInlineBytes && !f.inline_entries.empty()) {
        contended.push_back(f.inline_entries.back());
        f.inline_entries.pop_back();
      }
      f.latest.push_back(payload);
      f.base.push_back(make_page(0));
      f.has_flash.push_back(false);
      f.inode_dirty = true;
      for (const auto& [idx, size] : contended) route_contended(f, idx, size);
      cache_.insert(key, payload, true);
      outcomes_.push_back(WriteOutcome::Appended);
      return;
    }

    std::optional<Page> prior = f.latest[r.page_index];
    Page payload = materialize_payload(r, prior);
    f.latest[r.page_index] = payload;

    if (!compress_) {
      cache_.insert(key, payload, true);
      outcomes_.push_back(WriteOutcome::PlainDirty);
      return;
    }
    const OCacheSlot* cached = cache_.peek(key);
    if (cached && cached->dirty) {
      cache_.insert(key, payload, true);
      outcomes_.push_back(WriteOutcome::PlainDirty);
      return;
    }
    if (cached) {
      ++base_hits_;
    } else {
      ++base_misses_;
    }
    static const ZeroRleCodec codec;
    DeltaPayload delta = delta_encode(f.base[r.page_index], payload, codec);
    if (delta.size() >= 256) {
      remove_live_delta(f, r.page_index);
      cache_.insert(key, payload, true);
      outcomes_.push_back(WriteOutcome::PlainDirty);
      return;
    }
    remove_live_delta(f, r.page_index);
    if (delta.size() + 3 <= free_space(f)) {
      f.inline_entries.emplace_back(r.page_index, delta.size());
      f.inode_dirty = true;
      cache_.insert(key, payload, false);
      outcomes_.push_back(WriteOutcome::CompressedInline);
      return;
    }
    // try_replace: largest entry, ties oldest.
    if (!f.inline_entries.empty()) {
      std::size_t victim = 0;
      for (std::size_t i = 1; i < f.inline_entries.size(); ++i) {
        if (f.inline_entries[i].second + 3 > f.inline_entries[victim].second + 3) victim = i;
      }
      double spared = double(f.inline_entries[victim].second + 3) - double(delta.size() + 3);
      double hr = cfg_.forced_hr ? *cfg_.forced_hr
                  : (base_hits_ + base_misses_) == 0
                      ? 1.0
                      : double(base_hits_) / double(base_hits_ + base_misses_);
      const LatencyParams& lp = cfg_.latency;
      double ben = spared / lp.alpha_bytes * (lp.gamma_us - lp.beta_us);
      double oh = lp.gamma_us + lp.epsilon_us + hr * lp.lambda_us + (1.0 - hr) * lp.delta_miss_us;
      if (spared > 0 && ben > oh) {
        auto [v_idx, v_size] = f.inline_entries[victim];
        f.inline_entries.erase(f.inline_entries.begin() + std::ptrdiff_t(victim));
        f.inline_entries.emplace_back(r.page_index, delta.size());
        f.inode_dirty = true;
        restore_evicted(f, v_idx);
        cache_.insert(key, payload, false);
        outcomes_.push_back(WriteOutcome::CompressedInline);
        return;
      }
    }
    HotnessClass cls = hotness_.classify(f.ino, clock_);
    if (cls != HotnessClass::ReadColdWriteHot) {
      cache_.insert(key, payload, true);
      outcomes_.push_back(WriteOutcome::PlainDirty);
      return;
    }
    std::size_t packed = delta.size() + 2;
    for (const auto& [i, s] : f.pending) packed += s + 2;
    if (packed > kBlockSize) throw std::runtime_error("oracle: pending overflow unexpected");
    f.pending.emplace_back(r.page_index, delta.size());
    cache_.insert(key, payload, false);
    if (f.pending.size() >= std::size_t(cfg_.dcm_threshold)) {
      std::size_t bytes = 0;
      for (const auto& [i, s] : f.pending) bytes += s + 2;
      if (bytes <= kBlockSize) compact_pending(f);
    }
    outcomes_.push_back(WriteOutcome::CompressedMain);
  }

  void do_read(const TraceRecord& r) {
    OFile& f = files_.at(r.path);
    hotness_.record(f.ino, false, clock_);
    PageKey key{f.ino, r.page_index};
    if (cache_.get(key)) return;
    if (has_live_delta(f, r.page_index)) ++base_misses_;
    cache_.insert(key, f.latest[r.page_index], false);
  }

  void do_flush(std::optional<InodeNum> ino) {
    for (auto& [path, f] : files_) {
      if (ino && f.ino != *ino) continue;
      for (std::uint32_t i = 0; i < f.latest.size(); ++i) {
        PageKey key{f.ino, i};
        auto it = cache_.slots().find(key);
        if (it == cache_.slots().end() || !it->second.dirty) continue;
        writes_ += 1;
        f.has_flash[i] = true;
        f.base[i] = it->second.payload;
        f.inode_dirty = true;
        it->second.dirty = false;
      }
    }
    for (auto& [path, f] : files_) {
      if (ino && f.ino != *ino) continue;
      if (f.inode_dirty) {
        writes_ += 1;
        f.inode_dirty = false;
      }
    }
    if (names_dirty_) {
      writes_ += dir_chunks();
      names_dirty_ = false;
      writes_ += 1;  // superblock via namespace persist
      super_dirty_ = false;
    } else if (super_dirty_) {
      writes_ += 1;
      super_dirty_ = false;
    }
  }

  std::size_t dir_chunks() const {
    std::size_t stream = 4;
    for (const auto& [path, f] : files_) stream += 6 + path.size();
    std::size_t chunk = kBlockSize - 10;
    std::size_t n = (stream + chunk - 1) / chunk;
    return n == 0 ? 1 : n;
  }

  void do_delete(const std::string& path) {
    OFile& f = files_.at(path);
    if (f.in_bgres) {
      auto it = std::find(bgres_.begin(), bgres_.end(), f.ino);
      InodeNum prev_ino = (it != bgres_.end() && it != bgres_.begin()) ? *std::prev(it) : 0;
      bgres_unlink(f);
      if (prev_ino != 0) {
        OFile& prev = file_of(prev_ino);
        if (prev.inode_dirty) flush_inode(prev);
      }
    }
    cache_.drop_ino(f.ino);
    hotness_.forget(f.ino);
    files_.erase(path);
    names_dirty_ = true;
    // remove() persists the namespace immediately.
    writes_ += dir_chunks();
    names_dirty_ = false;
    writes_ += 1;  // superblock
    super_dirty_ = false;
  }

  void do_bgres(std::size_t budget) {
    std::size_t walked = 0;
    std::vector<InodeNum> touched;
    std::size_t pos = 0;
    while (pos < bgres_.size() && walked < budget) {
      InodeNum cur = bgres_[pos];
      OFile& f = file_of(cur);
      HotnessClass cls = hotness_.classify(cur, clock_);
      bool read_hot =
          cls == HotnessClass::ReadHotWriteCold || cls == HotnessClass::ReadHotWriteHot;
      bool below = dcm_count(f) < std::size_t(cfg_.dcm_threshold);
      if (read_hot || below) {
        if (pos > 0) touched.push_back(bgres_[pos - 1]);
        if (pos == 0) super_dirty_ = true;
        if (pos > 0) file_of(bgres_[pos - 1]).inode_dirty = true;
        f.inode_dirty = true;
        bgres_.erase(bgres_.begin() + std::ptrdiff_t(pos));
        f.in_bgres = false;
        for (const auto& d : f.descs) {
          for (const auto& [idx, size] : d.pairs) {
            cache_.insert(PageKey{f.ino, idx}, f.latest[idx], true);
          }
        }
        f.descs.clear();
        f.has_mid = false;
        make_inode_durable(f);
        // pos now points at the next list element
      } else {
        ++pos;
      }
      ++walked;
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (InodeNum ino : touched) {
      OFile& f = file_of(ino);
      if (f.inode_dirty) flush_inode(f);
    }
    if (super_dirty_) {
      writes_ += 1;
      super_dirty_ = false;
    }
  }

  FsConfig cfg_;
  bool compress_;
  OracleCache cache_;
  OracleHotness hotness_;
  std::map<std::string, OFile> files_;
  std::vector<InodeNum> bgres_;  // head first
  bool names_dirty_ = false;
  bool super_dirty_ = false;
  InodeNum next_ino_ = 1;
  std::uint64_t clock_ = 0;
  std::uint64_t writes_ = 1;  // the formatted superblock
  std::uint64_t base_hits_ = 0;
  std::uint64_t base_misses_ = 0;
  std::vector<WriteOutcome> outcomes_;
};

struct OraclePrediction {
  std::vector<WriteOutcome> outcomes;
  std::uint64_t enabled_writes = 0;
  std::uint64_t baseline_writes = 0;
  std::uint64_t compressed = 0;
};

inline OraclePrediction predict(const std::vector<TraceRecord>& records, const FsConfig& cfg) {
  OracleFs enabled(cfg, true);
  FsConfig base_cfg = cfg;
  OracleFs baseline(base_cfg, false);
  for (const auto& r : records) {
    enabled.apply(r);
    baseline.apply(r);
  }
  OraclePrediction p;
  p.outcomes = enabled.outcomes();
  p.enabled_writes = enabled.writes();
  p.baseline_writes = baseline.writes();
  for (WriteOutcome o : p.outcomes) {
    if (o == WriteOutcome::CompressedInline || o == WriteOutcome::CompressedMain) ++p.compressed;
  }
  return p;
}

}  // namespace deltafs::oracle
