#include "deltafs/lfs_core.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "deltafs/crc32.hpp"
#include "deltafs/errors.hpp"

namespace deltafs {

namespace {
constexpr std::size_t kDciDeltaLimit = 256;  // deltas this size or larger stay uncompressed
constexpr std::size_t kDirChunkBytes = kBlockSize - 10;
}  // namespace

const char* outcome_name(WriteOutcome o) {
  switch (o) {
    case WriteOutcome::CompressedInline: return "compressed-inline";
    case WriteOutcome::CompressedMain: return "compressed-main";
    case WriteOutcome::PlainDirty: return "plain-dirty";
    case WriteOutcome::Appended: return "appended";
  }
  return "?";
}

void ModelAccounting::count(WriteOutcome o) {
  switch (o) {
    case WriteOutcome::CompressedInline: ++compressed_inline; break;
    case WriteOutcome::CompressedMain: ++compressed_main; break;
    case WriteOutcome::PlainDirty: ++plain_dirty; break;
    case WriteOutcome::Appended: ++appended; break;
  }
}

Page Superblock::serialize() const {
  Page p = make_page();
  p[0] = 'D'; p[1] = 'F'; p[2] = 'S'; p[3] = 'B';
  store_u32le(p.data() + 4, 1);  // version
  store_u32le(p.data() + 8, static_cast<std::uint32_t>(kBlockSize));
  store_u32le(p.data() + 12, blocks_per_segment);
  store_u32le(p.data() + 16, segment_count);
  store_u32le(p.data() + 20, next_ino);
  store_u32le(p.data() + 24, bgres_head);
  store_u32le(p.data() + 28, dir_head);
  store_u32le(p.data() + 32, dir_blocks);
  store_u32le(p.data() + 4092, crc32(p.data(), 4092));
  return p;
}

Superblock Superblock::parse(const Page& p) {
  if (p[0] != 'D' || p[1] != 'F' || p[2] != 'S' || p[3] != 'B') {
    throw CorruptInode("bad superblock magic");
  }
  if (load_u32le(p.data() + 4092) != crc32(p.data(), 4092)) {
    throw CorruptInode("superblock checksum mismatch");
  }
  Superblock sb;
  sb.blocks_per_segment = load_u32le(p.data() + 12);
  sb.segment_count = load_u32le(p.data() + 16);
  sb.next_ino = load_u32le(p.data() + 20);
  sb.bgres_head = load_u32le(p.data() + 24);
  sb.dir_head = load_u32le(p.data() + 28);
  sb.dir_blocks = load_u32le(p.data() + 32);
  return sb;
}

LfsCore::LfsCore(const DeviceGeometry& geom, const FsConfig& config)
    : config_(config),
      dev_(geom.segment_count, geom.blocks_per_segment),
      cache_(config.cache_pages),
      hotness_(config.hcluster_window, config.hcluster_seed),
      dcm_(dev_, codec_, config.dcm_threshold) {
  model_ = LatencyModel{config_.latency, &cache_.stats(), config_.forced_hr};
  dev_.set_relocate_callback([this](Lba o, Lba n) { on_relocate(o, n); });
  super_.segment_count = geom.segment_count;
  super_.blocks_per_segment = geom.blocks_per_segment;
  format();
}

LfsCore::LfsCore(BlockDevice device, const FsConfig& config)
    : config_(config),
      dev_(std::move(device)),
      cache_(config.cache_pages),
      hotness_(config.hcluster_window, config.hcluster_seed),
      dcm_(dev_, codec_, config.dcm_threshold) {
  model_ = LatencyModel{config_.latency, &cache_.stats(), config_.forced_hr};
  dev_.set_relocate_callback([this](Lba o, Lba n) { on_relocate(o, n); });
  recover_state();
}

void LfsCore::format() {
  Lba lba = dev_.alloc_and_write(super_.serialize());
  if (lba != 0) throw Error("superblock must land at lba 0");
  dev_.pin(0);
  super_dirty_ = false;
}

InodeImage& LfsCore::inode(InodeNum ino) {
  InodeImage* ind = cache_.inode_get(ino);
  if (!ind) throw NotFound("inode " + std::to_string(ino) + " not cached");
  return *ind;
}

const InodeImage& LfsCore::inode(InodeNum ino) const {
  auto it = cache_.inodes().find(ino);
  if (it == cache_.inodes().end()) throw NotFound("inode " + std::to_string(ino) + " not cached");
  return it->second;
}

FileHandle LfsCore::create(const std::string& path) {
  if (names_.count(path)) throw Exists("path exists: " + path);
  InodeNum ino = super_.next_ino++;
  super_dirty_ = true;
  InodeImage ind(ino);
  cache_.inode_put(std::move(ind));
  inode_lba_[ino] = kNullLba;
  names_[path] = ino;
  names_dirty_ = true;
  return FileHandle{ino, path};
}

FileHandle LfsCore::open(const std::string& path) const {
  auto it = names_.find(path);
  if (it == names_.end()) throw NotFound("no such file: " + path);
  return FileHandle{it->second, path};
}

void LfsCore::remove(const std::string& path) {
  auto it = names_.find(path);
  if (it == names_.end()) throw NotFound("no such file: " + path);
  InodeNum ino = it->second;
  InodeImage& ind = inode(ino);

  if (ind.has_mid()) {
    MetaImage meta = dcm_.read_meta(ind);
    for (const auto& d : meta.descriptors) dev_.invalidate(d.compact_lba);
    dev_.unpin(ind.mid());
    dev_.invalidate(ind.mid());
    InodeNum prev = 0;
    for (InodeNum cur = super_.bgres_head; cur != 0 && cur != ino;) {
      prev = cur;
      cur = inode(cur).bgres_next();
    }
    bgres_unlink(ind, prev);
    if (prev != 0 && inode(prev).dirty()) flush_inode(inode(prev));
  }
  for (Lba lba : ind.offsets()) {
    if (lba != kNullLba) dev_.invalidate(lba);
  }
  if (inode_lba_[ino] != kNullLba) dev_.invalidate(inode_lba_[ino]);

  cache_.drop_ino(ino);
  cache_.inode_erase(ino);
  inode_lba_.erase(ino);
  pending_.erase(ino);
  hotness_.forget(ino);
  names_.erase(it);
  names_dirty_ = true;
  // A crash must not leave a name pointing at an invalidated inode.
  persist_namespace();
  checkpoint_if_needed();
}

std::optional<DeltaPayload> LfsCore::find_live_delta(const InodeImage& ind,
                                                     std::uint32_t idx) const {
  auto pit = pending_.find(ind.ino());
  if (pit != pending_.end()) {
    for (const auto& e : pit->second) {
      if (e.page_index == idx) return e.payload;
    }
  }
  if (auto d = ind.lookup_delta(idx)) return d;
  return dcm_.lookup(ind, idx);
}

bool LfsCore::remove_live_delta(InodeImage& ind, std::uint32_t idx) {
  auto pit = pending_.find(ind.ino());
  if (pit != pending_.end()) {
    auto& v = pit->second;
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (it->page_index == idx) {
        v.erase(it);
        return true;
      }
    }
  }
  if (ind.remove_delta(idx)) return true;
  auto res = dcm_.remove(ind, idx);
  if (res.cleared_meta) {
    // Last main-area delta gone: leave the BGRes list and make the cleared
    // MID durable before a crash can see the stale mapping.
    InodeNum prev = 0;
    for (InodeNum cur = super_.bgres_head; cur != 0 && cur != ind.ino();) {
      prev = cur;
      cur = inode(cur).bgres_next();
    }
    bgres_unlink(ind, prev);
    make_inode_durable(ind);
    if (prev != 0 && inode(prev).dirty()) flush_inode(inode(prev));
    if (super_dirty_) persist_superblock();
  }
  return res.removed;
}

void LfsCore::restore_evicted_page(InodeImage& ind, const DeltaEntry& entry) {
  PageKey key{ind.ino(), entry.page_index};
  const CachedPage* cached = cache_.peek(key);
  double fetch;
  if (cached) {
    ++cache_.stats().base_hits;
    fetch = config_.latency.lambda_us;
    cache_.mark_dirty(key);  // cached New is current; just schedule the flush
  } else {
    ++cache_.stats().base_misses;
    fetch = config_.latency.delta_miss_us;
    Page base = dev_.read(ind.offset(entry.page_index));
    Page data = delta_apply(base, entry.payload, codec_);
    std::vector<PageKey> evicted = cache_.insert(key, data, PageState::Dirty);
    (void)evicted;
  }
  double stall = config_.latency.gamma_us + config_.latency.epsilon_us + fetch;
  acct_.eviction_stalls_us.push_back(stall);
  charge(stall);
}

void LfsCore::materialize_dirty(InodeImage& ind, const DeltaEntry& entry) {
  // Turn a delta whose record is being dropped into an ordinary dirty page.
  PageKey key{ind.ino(), entry.page_index};
  if (cache_.peek(key)) {
    cache_.mark_dirty(key);
    return;
  }
  Page base = dev_.read(ind.offset(entry.page_index));
  ++cache_.stats().base_misses;
  cache_.insert(key, delta_apply(base, entry.payload, codec_), PageState::Dirty);
}

void LfsCore::route_contended(InodeImage& ind, const DeltaEntry& entry) {
  HotnessClass cls = hotness_.classify(ind.ino(), clock_);
  auto res = dcm_.accept_evicted(ind, entry, cls);
  drain_relocations();
  if (res.placed) {
    if (res.created_meta) {
      bgres_link(ind);
      make_inode_durable(ind);
    }
    charge(config_.latency.beta_us);
  } else {
    restore_evicted_page(ind, entry);
  }
}

void LfsCore::bgres_link(InodeImage& ind) {
  ind.set_bgres_next(super_.bgres_head);
  super_.bgres_head = ind.ino();
  super_dirty_ = true;
}

void LfsCore::bgres_unlink(InodeImage& ind, InodeNum prev) {
  if (super_.bgres_head == ind.ino()) {
    super_.bgres_head = ind.bgres_next();
    super_dirty_ = true;
  } else if (prev != 0) {
    inode(prev).set_bgres_next(ind.bgres_next());
  }
  ind.set_bgres_next(0);
}

WriteOutcome LfsCore::route_rejected(InodeImage& ind, std::uint32_t idx, const Page& data,
                                     DeltaEntry candidate) {
  PageKey key{ind.ino(), idx};
  HotnessClass cls = hotness_.classify(ind.ino(), clock_);
  if (cls != HotnessClass::ReadColdWriteHot) {
    cache_.insert(key, data, PageState::Dirty);
    charge(config_.latency.gamma_us);
    return WriteOutcome::PlainDirty;
  }

  auto& pend = pending_[ind.ino()];
  std::size_t packed = candidate.payload.size() + 2;
  for (const auto& e : pend) packed += e.payload.size() + 2;
  if (packed > kBlockSize) {
    // Pending set would no longer fit one compact block; compact what is
    // there first (possible only with a threshold large enough to overflow).
    if (dcm_.should_compact(pend, cls)) {
      try {
        bool created = dcm_.compact(ind, pend);
        drain_relocations();
        pend.clear();
        if (created) {
          bgres_link(ind);
          make_inode_durable(ind);
        }
      } catch (const MetaFull&) {
        for (const auto& e : pend) materialize_dirty(ind, e);
        pend.clear();
      }
    } else {
      DeltaEntry oldest = pend.front();
      pend.erase(pend.begin());
      materialize_dirty(ind, oldest);
    }
  }

  pend.push_back(std::move(candidate));
  cache_.insert(key, data, PageState::Clean);

  if (dcm_.should_compact(pend, cls)) {
    try {
      bool created = dcm_.compact(ind, pend);
      drain_relocations();
      pend.clear();
      if (created) {
        bgres_link(ind);
        make_inode_durable(ind);
      }
    } catch (const MetaFull&) {
      // Meta-block exhausted: the pending deltas fall back to normal dirty
      // writes.
      for (const auto& e : pend) materialize_dirty(ind, e);
      pend.clear();
      charge(config_.latency.gamma_us);
      return WriteOutcome::PlainDirty;
    }
  }
  charge(config_.latency.beta_us);
  return WriteOutcome::CompressedMain;
}

WriteOutcome LfsCore::write_page(const FileHandle& h, std::uint32_t page_index,
                                 const Page& data) {
  InodeImage& ind = inode(h.ino);
  hotness_.record_access(h.ino, AccessOp::Write, clock_);
  std::uint32_t count = ind.page_count();
  if (page_index > count || page_index >= kMaxFilePages) {
    throw OutOfRange("page " + std::to_string(page_index) + " beyond tail of " + h.path);
  }
  PageKey key{h.ino, page_index};
  WriteOutcome outcome;

  if (page_index == count) {
    // Append: no base exists, so the page is plain dirty until flushed. The
    // grown offset array may push delta entries out of the inline area.
    std::vector<DeltaEntry> evicted = ind.evict_contending(count + 1);
    for (const auto& e : evicted) route_contended(ind, e);
    cache_.insert(key, data, PageState::Dirty);
    charge(config_.latency.gamma_us);
    outcome = WriteOutcome::Appended;
  } else if (!config_.compress) {
    cache_.insert(key, data, PageState::Dirty);
    charge(config_.latency.gamma_us);
    outcome = WriteOutcome::PlainDirty;
  } else {
    const CachedPage* cached = cache_.peek(key);
    if (cached && cached->state == PageState::Dirty) {
      // Dirty pages are rewritten in place in the cache and flushed as-is.
      cache_.insert(key, data, PageState::Dirty);
      charge(config_.latency.gamma_us);
      outcome = WriteOutcome::PlainDirty;
    } else {
      std::optional<DeltaPayload> existing = find_live_delta(ind, page_index);
      Page base;
      if (cached) {
        ++cache_.stats().base_hits;
        // An already-compressed page recovers Base from the cached New and
        // its delta; a plain clean page is bit-identical to its flash copy.
        base = existing ? recover_base(cached->payload, *existing, codec_) : cached->payload;
      } else {
        ++cache_.stats().base_misses;
        base = dev_.read(ind.offset(page_index));
      }
      DeltaPayload delta = delta_encode(base, data, codec_);
      if (delta.size() >= kDciDeltaLimit) {
        remove_live_delta(ind, page_index);
        cache_.insert(key, data, PageState::Dirty);
        charge(config_.latency.gamma_us);
        outcome = WriteOutcome::PlainDirty;
      } else {
        remove_live_delta(ind, page_index);
        if (ind.insert_delta(page_index, delta) == InsertResult::Inserted) {
          cache_.insert(key, data, PageState::Clean);
          charge(config_.latency.beta_us);
          outcome = WriteOutcome::CompressedInline;
        } else {
          DeltaEntry candidate{page_index, std::move(delta)};
          ReplaceResult rep = ind.try_replace(candidate, model_);
          if (rep.replaced) {
            restore_evicted_page(ind, rep.evicted);
            cache_.insert(key, data, PageState::Clean);
            charge(config_.latency.beta_us);
            outcome = WriteOutcome::CompressedInline;
          } else {
            outcome = route_rejected(ind, page_index, data, std::move(candidate));
          }
        }
      }
    }
  }
  acct_.count(outcome);
  checkpoint_if_needed();
  return outcome;
}

Page LfsCore::read_page(const FileHandle& h, std::uint32_t page_index) {
  InodeImage& ind = inode(h.ino);
  hotness_.record_access(h.ino, AccessOp::Read, clock_);
  if (page_index >= ind.page_count()) {
    throw OutOfRange("page " + std::to_string(page_index) + " beyond " + h.path);
  }
  ++acct_.reads;
  PageKey key{h.ino, page_index};
  if (const CachedPage* hit = cache_.get(key, LookupClass::Data)) {
    charge(config_.latency.lambda_us);
    return hit->payload;
  }
  std::optional<DeltaPayload> delta = find_live_delta(ind, page_index);
  Page out;
  if (delta) {
    Lba lba = ind.offset(page_index);
    if (lba == kNullLba) throw InvalidRead("delta without flash base");
    ++cache_.stats().base_misses;
    out = delta_apply(dev_.read(lba), *delta, codec_);
    charge(config_.latency.delta_miss_us + config_.latency.epsilon_us);
  } else {
    Lba lba = ind.offset(page_index);
    if (lba == kNullLba) throw InvalidRead("page was never flushed and is not cached");
    out = dev_.read(lba);
    charge(config_.latency.delta_miss_us);
  }
  cache_.insert(key, out, PageState::Clean);
  return out;
}

Page LfsCore::peek_page(const FileHandle& h, std::uint32_t page_index) const {
  const InodeImage& ind = inode(h.ino);
  if (page_index >= ind.page_count()) {
    throw OutOfRange("page " + std::to_string(page_index) + " beyond " + h.path);
  }
  if (const CachedPage* c = cache_.peek(PageKey{h.ino, page_index})) return c->payload;
  std::optional<DeltaPayload> delta = find_live_delta(ind, page_index);
  Lba lba = ind.offset(page_index);
  if (lba == kNullLba) throw InvalidRead("page was never flushed and is not cached");
  Page base = dev_.read(lba);
  return delta ? delta_apply(base, *delta, codec_) : base;
}

std::uint64_t LfsCore::file_size(const FileHandle& h) const { return inode(h.ino).file_size(); }

std::size_t LfsCore::flush_pages(std::optional<InodeNum> ino) {
  std::size_t written = 0;
  for (auto& [key, payload] : cache_.flush_dirty(ino)) {
    InodeImage& ind = inode(key.ino);
    Lba new_lba = alloc_block(payload);
    Lba old = ind.offset(key.page_index);
    if (old != kNullLba) dev_.invalidate(old);
    ind.set_offset(key.page_index, new_lba);
    ++written;
  }
  return written;
}

std::size_t LfsCore::flush_inode(InodeImage& ind) {
  // Never-flushed appends would leave null offsets inside a flushed inode;
  // write them first so the on-flash image is self-contained.
  std::size_t written = 0;
  for (const PageKey& key : cache_.dirty_keys(ind.ino())) {
    if (ind.offset(key.page_index) != kNullLba) continue;
    const CachedPage* page = cache_.peek(key);
    Lba lba = alloc_block(page->payload);
    ind.set_offset(key.page_index, lba);
    cache_.mark_clean(key);
    ++written;
  }
  Lba new_lba = alloc_block(ind.serialize());
  Lba& slot = inode_lba_[ind.ino()];
  if (slot != kNullLba) dev_.invalidate(slot);
  slot = new_lba;
  ind.set_dirty(false);
  return written + 1;
}

void LfsCore::make_inode_durable(InodeImage& ind) {
  // An inode flushed outside the normal flush path must not outrun its
  // directory entry, or a crash leaves an orphan block.
  flush_inode(ind);
  if (names_dirty_) persist_namespace();
  if (super_dirty_) persist_superblock();
}

std::size_t LfsCore::flush_dirty_inodes(std::optional<InodeNum> ino) {
  std::size_t written = 0;
  if (ino) {
    InodeImage& ind = inode(*ino);
    if (ind.dirty()) written += flush_inode(ind);
    return written;
  }
  for (auto& [num, ind] : cache_.inodes()) {
    if (ind.dirty()) written += flush_inode(ind);
  }
  return written;
}

std::size_t LfsCore::fsync(const FileHandle& h) {
  std::size_t written = flush_pages(h.ino);
  written += flush_dirty_inodes(h.ino);
  if (names_dirty_) persist_namespace();
  if (super_dirty_) persist_superblock();
  checkpoint_if_needed();
  return written;
}

std::size_t LfsCore::flush_all() {
  std::size_t written = flush_pages(std::nullopt);
  written += flush_dirty_inodes(std::nullopt);
  if (names_dirty_) persist_namespace();
  if (super_dirty_) persist_superblock();
  checkpoint_if_needed();
  return written;
}

void LfsCore::persist_namespace() {
  std::vector<std::uint8_t> stream;
  stream.resize(4);
  store_u32le(stream.data(), static_cast<std::uint32_t>(names_.size()));
  for (const auto& [path, ino] : names_) {
    std::size_t at = stream.size();
    stream.resize(at + 6 + path.size());
    store_u32le(stream.data() + at, ino);
    store_u16le(stream.data() + at + 4, static_cast<std::uint16_t>(path.size()));
    std::memcpy(stream.data() + at + 6, path.data(), path.size());
  }

  for (Lba lba : dir_lbas_) {
    if (dev_.state(lba) == BlockState::Valid) dev_.invalidate(lba);
  }
  dir_lbas_.clear();

  std::size_t chunks = (stream.size() + kDirChunkBytes - 1) / kDirChunkBytes;
  if (chunks == 0) chunks = 1;
  // Chain links point forward, so blocks are written tail-first.
  Lba next = 0;
  std::vector<Lba> reversed;
  for (std::size_t i = chunks; i-- > 0;) {
    std::size_t start = i * kDirChunkBytes;
    std::size_t len = std::min(kDirChunkBytes, stream.size() - start);
    Page p = make_page();
    p[0] = 'D'; p[1] = 'F'; p[2] = 'D'; p[3] = 'B';
    store_u32le(p.data() + 4, next);
    store_u16le(p.data() + 8, static_cast<std::uint16_t>(len));
    std::memcpy(p.data() + 10, stream.data() + start, len);
    next = alloc_block(p);
    reversed.push_back(next);
  }
  dir_lbas_.assign(reversed.rbegin(), reversed.rend());
  super_.dir_head = next;
  super_.dir_blocks = static_cast<std::uint32_t>(chunks);
  names_dirty_ = false;
  super_dirty_ = true;
  persist_superblock();
}

void LfsCore::persist_superblock() {
  dev_.overwrite(0, super_.serialize());
  super_dirty_ = false;
}

std::size_t LfsCore::run_bgres(std::size_t budget) {
  std::size_t restored_files = 0;
  std::set<InodeNum> touched;
  InodeNum prev = 0;
  InodeNum cur = super_.bgres_head;
  std::size_t walked = 0;
  while (cur != 0 && walked < budget) {
    InodeImage& ind = inode(cur);
    InodeNum next = ind.bgres_next();
    HotnessClass cls = hotness_.classify(cur, clock_);
    bool read_hot =
        cls == HotnessClass::ReadHotWriteCold || cls == HotnessClass::ReadHotWriteHot;
    bool below_threshold =
        dcm_.delta_count(ind) < static_cast<std::size_t>(config_.dcm_threshold);
    if (read_hot || below_threshold) {
      bgres_unlink(ind, prev);
      if (prev != 0) touched.insert(prev);
      acct_.bgres_restored_pages += dcm_.restore_file(ind, cache_);
      make_inode_durable(ind);  // cleared MID must not dangle across a crash
      ++restored_files;
    } else {
      prev = cur;
    }
    cur = next;
    ++walked;
  }
  for (InodeNum ino : touched) {
    InodeImage& ind = inode(ino);
    if (ind.dirty()) flush_inode(ind);
  }
  if (super_dirty_) persist_superblock();
  checkpoint_if_needed();
  return restored_files;
}

std::size_t LfsCore::idle_clean() {
  std::size_t freed = 0;
  if (dev_.free_blocks() < 2ull * dev_.blocks_per_segment()) {
    try {
      freed = dev_.clean_segment();
    } catch (const NothingToClean&) {
    }
  }
  checkpoint_if_needed();
  return freed;
}

void LfsCore::advance_clock(std::uint64_t tick) { clock_ = std::max(clock_, tick); }

void LfsCore::on_relocate(Lba old_lba, Lba new_lba) {
  reloc_journal_.emplace_back(old_lba, new_lba);
}

Lba LfsCore::alloc_block(const Page& payload) {
  Lba lba = dev_.alloc_and_write(payload);
  // Cleaning may have fired inside the allocation; patch pointers before
  // anyone reads a stale lba.
  drain_relocations();
  return lba;
}

void LfsCore::drain_relocations() {
  if (reloc_journal_.empty()) return;
  apply_relocations();
  reloc_dirty_ = true;
}

void LfsCore::apply_relocations() {
  std::map<Lba, Lba> moved(reloc_journal_.begin(), reloc_journal_.end());
  reloc_journal_.clear();

  for (auto& [ino, lba] : inode_lba_) {
    auto it = moved.find(lba);
    if (it != moved.end()) lba = it->second;
  }
  for (auto& [ino, ind] : cache_.inodes()) {
    for (std::uint32_t i = 0; i < ind.page_count(); ++i) {
      auto it = moved.find(ind.offset(i));
      if (it != moved.end()) ind.set_offset(i, it->second);
    }
    if (ind.has_mid()) {
      MetaImage meta = dcm_.read_meta(ind);
      bool changed = false;
      for (auto& d : meta.descriptors) {
        auto it = moved.find(d.compact_lba);
        if (it != moved.end()) {
          d.compact_lba = it->second;
          changed = true;
        }
      }
      if (changed) dev_.overwrite(ind.mid(), meta.serialize());
    }
  }
  bool dir_moved = false;
  for (Lba& lba : dir_lbas_) {
    auto it = moved.find(lba);
    if (it != moved.end()) {
      lba = it->second;
      dir_moved = true;
    }
  }
  if (dir_moved) names_dirty_ = true;  // internal chain links are stale
}

void LfsCore::checkpoint_if_needed() {
  // After any cleaning, the patched metadata must become durable before the
  // operation returns, or a crash would observe dangling pointers.
  int rounds = 0;
  for (;;) {
    drain_relocations();
    if (!reloc_dirty_) break;
    if (++rounds > 8) throw Error("relocation checkpoint did not converge");
    reloc_dirty_ = false;
    flush_dirty_inodes(std::nullopt);
    if (names_dirty_) persist_namespace();
    if (super_dirty_) persist_superblock();
  }
}

RecoveryReport LfsCore::crash_and_recover() {
  RecoveryReport report;
  cache_.clear();
  names_.clear();
  dir_lbas_.clear();
  inode_lba_.clear();
  pending_.clear();
  reloc_journal_.clear();
  hotness_.reset();
  names_dirty_ = false;
  super_dirty_ = false;
  recover_state();

  for (const auto& [path, ino] : names_) {
    auto it = cache_.inodes().find(ino);
    if (it == cache_.inodes().end()) {
      report.unrecoverable.emplace_back(path, 0, "inode block missing");
      continue;
    }
    const InodeImage& ind = it->second;
    ++report.files_recovered;
    for (std::uint32_t i = 0; i < ind.page_count(); ++i) {
      if (ind.offset(i) == kNullLba) {
        report.unrecoverable.emplace_back(path, i, "append was never flushed");
      }
    }
    for (const auto& e : ind.entries()) {
      try {
        Page base = dev_.read(ind.offset(e.page_index));
        (void)delta_apply(base, DeltaPayload{e.bytes}, codec_);
        ++report.compressed_pages_verified;
      } catch (const Error& err) {
        report.unrecoverable.emplace_back(path, e.page_index, err.what());
      }
    }
    if (ind.has_mid()) {
      try {
        MetaImage meta = dcm_.read_meta(ind);
        for (const auto& d : meta.descriptors) {
          Page compact = dev_.read(d.compact_lba);
          for (const auto& [pi, off] : d.pairs) {
            try {
              if (off + 2u > kBlockSize) throw CorruptMapping("offset beyond block");
              std::uint16_t size = load_u16le(compact.data() + off);
              if (size == 0 || off + 2u + size > kBlockSize) {
                throw CorruptMapping("size walks out of block");
              }
              DeltaPayload delta;
              delta.bytes.assign(compact.data() + off + 2, compact.data() + off + 2 + size);
              Page base = dev_.read(ind.offset(pi));
              (void)delta_apply(base, delta, codec_);
              ++report.compressed_pages_verified;
            } catch (const Error& err) {
              report.unrecoverable.emplace_back(path, pi, err.what());
            }
          }
        }
      } catch (const Error& err) {
        report.unrecoverable.emplace_back(path, 0, err.what());
      }
    }
  }
  report.inodes_recovered = cache_.inodes().size();
  return report;
}

void LfsCore::recover_state() {
  super_ = Superblock::parse(dev_.read(0));
  dev_.pin(0);

  // Namespace from the directory chain.
  std::vector<std::uint8_t> stream;
  Lba cur = super_.dir_head;
  std::uint32_t seen = 0;
  while (cur != 0) {
    Page p = dev_.read(cur);
    if (p[0] != 'D' || p[1] != 'F' || p[2] != 'D' || p[3] != 'B') {
      throw CorruptInode("bad directory block magic");
    }
    dir_lbas_.push_back(cur);
    std::uint16_t len = load_u16le(p.data() + 8);
    stream.insert(stream.end(), p.data() + 10, p.data() + 10 + len);
    cur = load_u32le(p.data() + 4);
    if (++seen > super_.dir_blocks + 1) throw CorruptInode("directory chain too long");
  }
  if (!stream.empty()) {
    std::uint32_t count = load_u32le(stream.data());
    std::size_t pos = 4;
    for (std::uint32_t i = 0; i < count; ++i) {
      if (pos + 6 > stream.size()) throw CorruptInode("truncated directory stream");
      InodeNum ino = load_u32le(stream.data() + pos);
      std::uint16_t len = load_u16le(stream.data() + pos + 4);
      pos += 6;
      if (pos + len > stream.size()) throw CorruptInode("truncated directory name");
      names_.emplace(std::string(stream.begin() + pos, stream.begin() + pos + len), ino);
      pos += len;
    }
  }

  // Inode blocks self-identify by magic + checksum; out-of-place rewrites
  // leave exactly one valid block per inode.
  std::map<InodeNum, std::pair<Lba, InodeImage>> found;
  for (Lba lba = 0; lba < dev_.capacity_blocks(); ++lba) {
    if (dev_.state(lba) != BlockState::Valid) continue;
    Page p = dev_.read(lba);
    if (p[0] != 'D' || p[1] != 'F' || p[2] != 'I' || p[3] != 'N') continue;
    try {
      InodeImage ind = InodeImage::parse(p);
      found.emplace(ind.ino(), std::make_pair(lba, std::move(ind)));
    } catch (const CorruptInode&) {
      continue;
    }
  }
  for (const auto& [path, ino] : names_) {
    auto it = found.find(ino);
    if (it == found.end()) continue;
    inode_lba_[ino] = it->second.first;
    InodeImage& ind = cache_.inode_put(std::move(it->second.second));
    ind.set_dirty(false);
    if (ind.has_mid()) dev_.pin(ind.mid());
    super_.next_ino = std::max(super_.next_ino, ino + 1);
  }
}

ConsistencyReport LfsCore::fsck() const {
  ConsistencyReport rep;
  auto flag = [&rep](const std::string& v) { rep.violations.push_back(v); };

  // Device conservation and per-segment log order.
  if (dev_.valid_blocks() + dev_.invalid_blocks() + dev_.free_blocks() !=
      dev_.capacity_blocks()) {
    flag("device block states do not sum to capacity");
  }
  for (std::uint32_t seg = 0; seg < dev_.segment_count(); ++seg) {
    std::uint64_t last = 0;
    for (std::uint32_t b = 0; b < dev_.blocks_per_segment(); ++b) {
      Lba lba = seg * dev_.blocks_per_segment() + b;
      if (dev_.state(lba) == BlockState::Free) continue;
      if (dev_.is_pinned(lba)) continue;  // in-place updated, outside the log discipline
      std::uint64_t s = dev_.write_stamp(lba);
      if (s < last) flag("write order not monotone in segment " + std::to_string(seg));
      last = s;
    }
  }

  std::set<Lba> referenced;
  referenced.insert(0);
  for (Lba lba : dir_lbas_) referenced.insert(lba);

  std::set<InodeNum> mid_owners;
  for (const auto& [path, ino] : names_) {
    auto it = cache_.inodes().find(ino);
    if (it == cache_.inodes().end()) {
      flag("name " + path + " points at unknown inode " + std::to_string(ino));
      continue;
    }
    const InodeImage& ind = it->second;

    if (ind.page_count() != (ind.file_size() + kBlockSize - 1) / kBlockSize) {
      flag(path + ": offset count does not match file size");
    }
    auto lit = inode_lba_.find(ino);
    if (lit == inode_lba_.end()) {
      flag(path + ": no inode location tracked");
    } else if (lit->second != kNullLba) {
      referenced.insert(lit->second);
      if (dev_.state(lit->second) != BlockState::Valid) {
        flag(path + ": inode block not valid on device");
      } else {
        try {
          InodeImage flash = InodeImage::parse(dev_.read(lit->second));
          if (flash.ino() != ino) flag(path + ": inode block ino mismatch");
        } catch (const Error& e) {
          flag(path + ": inode block corrupt: " + e.what());
        }
      }
    }

    std::set<std::uint32_t> delta_pages;
    for (const auto& e : ind.entries()) {
      if (e.page_index >= ind.page_count()) flag(path + ": inline delta beyond file tail");
      if (!delta_pages.insert(e.page_index).second) {
        flag(path + ": duplicate delta for page " + std::to_string(e.page_index));
      }
      if (e.bytes.empty() || e.bytes.size() > InodeImage::kMaxDeltaBytes) {
        flag(path + ": inline delta size out of range");
      }
    }
    for (std::uint32_t i = 0; i < ind.page_count(); ++i) {
      Lba lba = ind.offset(i);
      if (lba == kNullLba) {
        const CachedPage* c = cache_.peek(PageKey{ino, i});
        if (!c || c->state != PageState::Dirty) {
          flag(path + ": page " + std::to_string(i) + " has no flash copy and no dirty page");
        }
        continue;
      }
      referenced.insert(lba);
      if (dev_.state(lba) != BlockState::Valid) {
        flag(path + ": data offset " + std::to_string(i) + " points at non-valid lba");
      }
    }

    bool has_main = false;
    if (ind.has_mid()) {
      mid_owners.insert(ino);
      referenced.insert(ind.mid());
      if (dev_.state(ind.mid()) != BlockState::Valid) {
        flag(path + ": dangling MID");
      } else {
        try {
          MetaImage meta = dcm_.read_meta(ind);
          has_main = meta.delta_count() > 0;
          if (!has_main) flag(path + ": meta-block holds no mappings");
          for (const auto& d : meta.descriptors) {
            referenced.insert(d.compact_lba);
            if (dev_.state(d.compact_lba) != BlockState::Valid) {
              flag(path + ": compact block not valid");
              continue;
            }
            Page compact = dev_.read(d.compact_lba);
            for (const auto& [pi, off] : d.pairs) {
              if (pi >= ind.page_count()) {
                flag(path + ": main delta beyond file tail");
                continue;
              }
              if (!delta_pages.insert(pi).second) {
                flag(path + ": page " + std::to_string(pi) + " has both inline and main delta");
              }
              try {
                if (off + 2u > kBlockSize) throw CorruptMapping("DO beyond block");
                std::uint16_t size = load_u16le(compact.data() + off);
                if (size == 0 || off + 2u + size > kBlockSize) {
                  throw CorruptMapping("size walks out of block");
                }
                DeltaPayload delta;
                delta.bytes.assign(compact.data() + off + 2, compact.data() + off + 2 + size);
                Lba base_lba = ind.offset(pi);
                if (base_lba == kNullLba || dev_.state(base_lba) != BlockState::Valid) {
                  throw CorruptMapping("no valid base");
                }
                Page data = delta_apply(dev_.read(base_lba), delta, codec_);
                const CachedPage* c = cache_.peek(PageKey{ino, pi});
                if (c && c->state == PageState::Clean && c->payload != data) {
                  flag(path + ": main delta does not reproduce cached page " +
                       std::to_string(pi));
                }
              } catch (const Error& e) {
                flag(path + ": page " + std::to_string(pi) + " mapping: " + e.what());
              }
            }
          }
        } catch (const Error& e) {
          flag(path + ": meta-block: " + e.what());
        }
      }
    }

    // Clean-compress discipline and base validity for inline deltas.
    for (const auto& e : ind.entries()) {
      Lba base_lba = e.page_index < ind.page_count() ? ind.offset(e.page_index) : kNullLba;
      if (base_lba == kNullLba || dev_.state(base_lba) != BlockState::Valid) {
        flag(path + ": inline delta for page " + std::to_string(e.page_index) +
             " lacks a valid base");
      }
      const CachedPage* c = cache_.peek(PageKey{ino, e.page_index});
      if (c && c->state == PageState::Dirty) {
        flag(path + ": page with live inline delta is dirty in cache");
      }
    }
    auto pit = pending_.find(ino);
    if (pit != pending_.end()) {
      for (const auto& e : pit->second) {
        const CachedPage* c = cache_.peek(PageKey{ino, e.page_index});
        if (c && c->state == PageState::Dirty) {
          flag(path + ": page with pending delta is dirty in cache");
        }
      }
    }

    bool tag_expected = !ind.entries().empty() || ind.has_mid();
    if (ind.compress_tag() != tag_expected) flag(path + ": compress_tag incoherent");
    CompressType expect = ind.has_mid() ? CompressType::Main
                          : !ind.entries().empty() ? CompressType::Inline
                                                   : CompressType::None;
    if (ind.compress_type() != expect) flag(path + ": compress_type incoherent");
  }

  // BGRes list: acyclic, every member MAIN, every MID owner a member.
  std::set<InodeNum> listed;
  InodeNum cur = super_.bgres_head;
  while (cur != 0) {
    if (!listed.insert(cur).second) {
      flag("BGRes list cycle at inode " + std::to_string(cur));
      break;
    }
    auto it = cache_.inodes().find(cur);
    if (it == cache_.inodes().end()) {
      flag("BGRes list names unknown inode " + std::to_string(cur));
      break;
    }
    if (it->second.compress_type() != CompressType::Main) {
      flag("BGRes-listed inode " + std::to_string(cur) + " is not main-compressed");
    }
    cur = it->second.bgres_next();
  }
  for (InodeNum ino : mid_owners) {
    if (!listed.count(ino)) {
      flag("inode " + std::to_string(ino) + " has a MID but is not BGRes-listed");
    }
  }

  // Every valid device block belongs to something.
  for (Lba lba = 0; lba < dev_.capacity_blocks(); ++lba) {
    if (dev_.state(lba) == BlockState::Valid && !referenced.count(lba)) {
      flag("valid block " + std::to_string(lba) + " is unreferenced");
    }
  }
  return rep;
}

std::size_t LfsCore::inline_delta_count() const {
  std::size_t n = 0;
  for (const auto& [ino, ind] : cache_.inodes()) n += ind.entries().size();
  return n;
}

std::size_t LfsCore::dcm_delta_count() const {
  std::size_t n = 0;
  for (const auto& [ino, ind] : cache_.inodes()) n += dcm_.delta_count(ind);
  return n;
}

std::vector<std::pair<std::string, InodeNum>> LfsCore::list_files() const {
  std::vector<std::pair<std::string, InodeNum>> out;
  out.reserve(names_.size());
  for (const auto& [path, ino] : names_) out.emplace_back(path, ino);
  return out;
}

void LfsCore::save(const std::string& path) {
  flush_all();
  dev_.save(path);
}

std::unique_ptr<LfsCore> LfsCore::mount(const std::string& path, const FsConfig& config) {
  return std::unique_ptr<LfsCore>(new LfsCore(BlockDevice::load(path), config));
}

}  // namespace deltafs
