#include "deltafs/dcm_store.hpp"

#include <algorithm>
#include <cstring>

#include "deltafs/errors.hpp"
#include "deltafs/page_cache.hpp"

namespace deltafs {

std::size_t MetaImage::wire_size() const {
  std::size_t s = 4;  // terminator
  for (const auto& d : descriptors) s += d.wire_size();
  return s;
}

std::size_t MetaImage::delta_count() const {
  std::size_t n = 0;
  for (const auto& d : descriptors) n += d.pairs.size();
  return n;
}

Page MetaImage::serialize() const {
  if (wire_size() > kBlockSize) throw MetaFull("meta-block overflow");
  Page p = make_page();
  std::size_t pos = 0;
  for (const auto& d : descriptors) {
    if (d.pairs.empty() || d.pairs.size() > 255) throw CorruptMapping("bad descriptor CN");
    store_u32le(p.data() + pos, d.compact_lba);
    p[pos + 4] = static_cast<std::uint8_t>(d.pairs.size());
    store_u16le(p.data() + pos + 5, d.free_space);
    pos += 7;
    for (const auto& [pi, off] : d.pairs) {
      store_u32le(p.data() + pos, pi);
      store_u16le(p.data() + pos + 4, off);
      pos += 6;
    }
  }
  // zero lba terminator already present (page is zero-filled)
  return p;
}

MetaImage MetaImage::parse(const Page& p) {
  MetaImage m;
  std::size_t pos = 0;
  for (;;) {
    if (pos + 4 > kBlockSize) throw CorruptMapping("meta-block missing terminator");
    Lba lba = load_u32le(p.data() + pos);
    if (lba == 0) break;
    if (pos + 7 > kBlockSize) throw CorruptMapping("truncated descriptor header");
    CompactDescriptor d;
    d.compact_lba = lba;
    std::uint8_t cn = p[pos + 4];
    d.free_space = load_u16le(p.data() + pos + 5);
    pos += 7;
    if (cn == 0) throw CorruptMapping("descriptor with zero entries");
    if (pos + 6 * std::size_t(cn) > kBlockSize) throw CorruptMapping("truncated mapping pairs");
    for (std::uint8_t i = 0; i < cn; ++i) {
      d.pairs.emplace_back(load_u32le(p.data() + pos), load_u16le(p.data() + pos + 4));
      pos += 6;
    }
    m.descriptors.push_back(std::move(d));
  }
  return m;
}

bool DcmStore::should_compact(const std::vector<DeltaEntry>& pending,
                              HotnessClass hotness) const {
  if (hotness != HotnessClass::ReadColdWriteHot) return false;
  if (pending.size() < static_cast<std::size_t>(threshold_)) return false;
  std::size_t bytes = 0;
  for (const auto& e : pending) bytes += e.payload.size() + 2;
  return bytes <= kBlockSize;
}

MetaImage DcmStore::read_meta(const InodeImage& inode) const {
  if (!inode.has_mid()) return MetaImage{};
  return MetaImage::parse(dev_.read(inode.mid()));
}

void DcmStore::write_meta(InodeImage& inode, const MetaImage& meta, bool& created) {
  Page block = meta.serialize();
  if (inode.has_mid()) {
    dev_.overwrite(inode.mid(), block);
  } else {
    Lba lba = dev_.alloc_and_write(block);
    dev_.pin(lba);
    inode.set_mid(lba);
    created = true;
  }
}

bool DcmStore::compact(InodeImage& inode, const std::vector<DeltaEntry>& pending) {
  MetaImage meta = read_meta(inode);
  CompactDescriptor desc;
  Page block = make_page();
  std::size_t pos = 0;
  for (const auto& e : pending) {
    if (pos + 2 + e.payload.size() > kBlockSize) throw Error("pending set exceeds one block");
    desc.pairs.emplace_back(e.page_index, static_cast<std::uint16_t>(pos));
    store_u16le(block.data() + pos, static_cast<std::uint16_t>(e.payload.size()));
    std::memcpy(block.data() + pos + 2, e.payload.bytes.data(), e.payload.size());
    pos += 2 + e.payload.size();
  }
  desc.free_space = static_cast<std::uint16_t>(kBlockSize - pos);
  if (!meta.fits(desc.wire_size())) throw MetaFull("meta-block cannot take another descriptor");

  desc.compact_lba = dev_.alloc_and_write(block);
  meta.descriptors.push_back(std::move(desc));
  bool created = false;
  write_meta(inode, meta, created);
  inode.refresh_compress_state();
  inode.set_dirty(true);
  return created;
}

DcmStore::AcceptResult DcmStore::accept_evicted(InodeImage& inode, const DeltaEntry& entry,
                                                HotnessClass hotness) {
  AcceptResult res;
  std::size_t need = entry.payload.size() + 2;
  MetaImage meta = read_meta(inode);

  // Newest block with room wins; descriptors are in creation order.
  for (auto it = meta.descriptors.rbegin(); it != meta.descriptors.rend(); ++it) {
    if (it->free_space < need || it->pairs.size() >= 255) continue;
    Page block = dev_.read(it->compact_lba);
    std::size_t pos = kBlockSize - it->free_space;
    store_u16le(block.data() + pos, static_cast<std::uint16_t>(entry.payload.size()));
    std::memcpy(block.data() + pos + 2, entry.payload.bytes.data(), entry.payload.size());
    // Appending changes the block content: out-of-place rewrite.
    dev_.invalidate(it->compact_lba);
    it->compact_lba = dev_.alloc_and_write(block);
    it->pairs.emplace_back(entry.page_index, static_cast<std::uint16_t>(pos));
    it->free_space = static_cast<std::uint16_t>(it->free_space - need);
    write_meta(inode, meta, res.created_meta);
    inode.refresh_compress_state();
    inode.set_dirty(true);
    res.placed = true;
    return res;
  }

  if (hotness != HotnessClass::ReadColdWriteHot) return res;

  CompactDescriptor desc;
  if (!meta.fits(desc.wire_size() + 6)) return res;  // meta full: caller restores
  Page block = make_page();
  store_u16le(block.data(), static_cast<std::uint16_t>(entry.payload.size()));
  std::memcpy(block.data() + 2, entry.payload.bytes.data(), entry.payload.size());
  desc.pairs.emplace_back(entry.page_index, 0);
  desc.free_space = static_cast<std::uint16_t>(kBlockSize - need);
  desc.compact_lba = dev_.alloc_and_write(block);
  meta.descriptors.push_back(std::move(desc));
  write_meta(inode, meta, res.created_meta);
  inode.refresh_compress_state();
  inode.set_dirty(true);
  res.placed = true;
  return res;
}

DeltaPayload DcmStore::read_entry(const Page& compact, std::uint16_t offset) const {
  if (offset + 2u > kBlockSize) throw CorruptMapping("delta offset beyond block");
  std::uint16_t size = load_u16le(compact.data() + offset);
  if (size == 0 || offset + 2 + std::size_t(size) > kBlockSize) {
    throw CorruptMapping("delta size walks out of block");
  }
  DeltaPayload d;
  d.bytes.assign(compact.data() + offset + 2, compact.data() + offset + 2 + size);
  return d;
}

std::optional<DeltaPayload> DcmStore::lookup(const InodeImage& inode,
                                             std::uint32_t page_index) const {
  if (!inode.has_mid()) return std::nullopt;
  MetaImage meta = read_meta(inode);
  for (const auto& d : meta.descriptors) {
    for (const auto& [pi, off] : d.pairs) {
      if (pi == page_index) return read_entry(dev_.read(d.compact_lba), off);
    }
  }
  return std::nullopt;
}

DcmStore::RemoveResult DcmStore::remove(InodeImage& inode, std::uint32_t page_index) {
  RemoveResult res;
  if (!inode.has_mid()) return res;
  MetaImage meta = read_meta(inode);
  for (auto dit = meta.descriptors.begin(); dit != meta.descriptors.end(); ++dit) {
    for (auto pit = dit->pairs.begin(); pit != dit->pairs.end(); ++pit) {
      if (pit->first != page_index) continue;
      dit->pairs.erase(pit);
      res.removed = true;
      if (dit->pairs.empty()) {
        dev_.invalidate(dit->compact_lba);
        meta.descriptors.erase(dit);
      }
      if (meta.descriptors.empty()) {
        dev_.unpin(inode.mid());
        dev_.invalidate(inode.mid());
        inode.clear_mid();
        res.cleared_meta = true;
      } else {
        bool created = false;
        write_meta(inode, meta, created);
      }
      inode.refresh_compress_state();
      inode.set_dirty(true);
      return res;
    }
  }
  return res;
}

std::size_t DcmStore::restore_file(InodeImage& inode, PageCache& cache) {
  if (!inode.has_mid()) return 0;
  MetaImage meta = read_meta(inode);
  std::size_t restored = 0;
  for (const auto& d : meta.descriptors) {
    Page compact = dev_.read(d.compact_lba);
    for (const auto& [pi, off] : d.pairs) {
      DeltaPayload delta = read_entry(compact, off);
      Page base = dev_.read(inode.offset(pi));
      Page data = delta_apply(base, delta, codec_);
      cache.insert(PageKey{inode.ino(), pi}, data, PageState::Dirty);
      ++restored;
    }
    dev_.invalidate(d.compact_lba);
  }
  dev_.unpin(inode.mid());
  dev_.invalidate(inode.mid());
  inode.clear_mid();
  inode.refresh_compress_state();
  inode.set_dirty(true);
  return restored;
}

std::size_t DcmStore::delta_count(const InodeImage& inode) const {
  if (!inode.has_mid()) return 0;
  return read_meta(inode).delta_count();
}

}  // namespace deltafs
