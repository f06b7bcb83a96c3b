#include "deltafs/inline_store.hpp"

#include <algorithm>
#include <cstring>

#include "deltafs/crc32.hpp"
#include "deltafs/errors.hpp"
#include "deltafs/page_cache.hpp"

namespace deltafs {

double LatencyModel::hr() const {
  if (forced_hr) return *forced_hr;
  if (hr_source) return hr_source->base_hit_rate();
  return 1.0;
}

double LatencyModel::benefit(double spared_inline_bytes) const {
  return spared_inline_bytes / params.alpha_bytes * (params.gamma_us - params.beta_us);
}

double LatencyModel::overhead() const {
  double h = hr();
  return params.gamma_us + params.epsilon_us + h * params.lambda_us +
         (1.0 - h) * params.delta_miss_us;
}

std::size_t InodeImage::free_space() const {
  std::size_t used = kReservedOffsetBytes + kXattrBytes + 4 * offsets_.size();
  for (const auto& e : entries_) used += e.total();
  return kInlineBytes - used;
}

InsertResult InodeImage::insert_delta(std::uint32_t page_index, const DeltaPayload& payload) {
  if (payload.size() > kMaxDeltaBytes) {
    throw OversizeDelta("delta of " + std::to_string(payload.size()) + " bytes");
  }
  if (payload.size() == 0) throw OversizeDelta("empty delta");
  for (const auto& e : entries_) {
    if (e.page_index == page_index) {
      throw Error("live inline entry already exists for page " + std::to_string(page_index));
    }
  }
  if (payload.size() + kEntryHeaderBytes > free_space()) return InsertResult::Full;
  entries_.push_back(InlineEntry{static_cast<std::uint16_t>(page_index), payload.bytes});
  compress_tag_ = true;
  if (ctype_ == CompressType::None) ctype_ = CompressType::Inline;
  dirty_ = true;
  return InsertResult::Inserted;
}

std::optional<DeltaPayload> InodeImage::lookup_delta(std::uint32_t page_index) const {
  // Tail-to-head scan: oldest entry sits nearest the xattr tail.
  for (const auto& e : entries_) {
    if (e.page_index == page_index) return DeltaPayload{e.bytes};
  }
  return std::nullopt;
}

bool InodeImage::remove_delta(std::uint32_t page_index) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->page_index == page_index) {
      entries_.erase(it);
      refresh_compress_state();
      dirty_ = true;
      return true;
    }
  }
  return false;
}

ReplaceResult InodeImage::try_replace(const DeltaEntry& candidate, const LatencyModel& model) {
  ReplaceResult res;
  if (entries_.empty()) return res;

  // Victim: the largest live entry (ties: oldest). Largest maximizes the
  // spared bytes and thus the chance the gate opens.
  std::size_t victim = 0;
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].total() > entries_[victim].total()) victim = i;
  }
  double spared = static_cast<double>(entries_[victim].total()) -
                  static_cast<double>(candidate.payload.size() + kEntryHeaderBytes);
  res.spared_bytes = spared;
  res.benefit = model.benefit(spared);
  res.overhead = model.overhead();
  if (spared <= 0 || res.benefit <= res.overhead) return res;

  res.evicted = DeltaEntry{entries_[victim].page_index, DeltaPayload{entries_[victim].bytes}};
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
  if (insert_delta(candidate.page_index, candidate.payload) != InsertResult::Inserted) {
    throw Error("replacement victim did not spare enough space");
  }
  res.replaced = true;
  return res;
}

std::vector<DeltaEntry> InodeImage::evict_contending(std::uint32_t new_offset_count) {
  std::vector<DeltaEntry> evicted;
  if (new_offset_count <= offsets_.size()) return evicted;

  std::size_t needed = kReservedOffsetBytes + kXattrBytes + 4 * std::size_t(new_offset_count);
  auto entry_bytes = [this] {
    std::size_t s = 0;
    for (const auto& e : entries_) s += e.total();
    return s;
  };
  // Newest entries occupy the lowest addresses, so the grown offset array
  // consumes them first.
  while (needed + entry_bytes() > kInlineBytes && !entries_.empty()) {
    InlineEntry& e = entries_.back();
    evicted.push_back(DeltaEntry{e.page_index, DeltaPayload{e.bytes}});
    entries_.pop_back();
  }
  offsets_.resize(new_offset_count, kNullLba);
  file_size_ = std::uint64_t(new_offset_count) * kBlockSize;
  refresh_compress_state();
  dirty_ = true;
  return evicted;
}

void InodeImage::refresh_compress_state() {
  if (mid_ != 0) {
    ctype_ = CompressType::Main;
  } else if (!entries_.empty()) {
    ctype_ = CompressType::Inline;
  } else {
    ctype_ = CompressType::None;
  }
  compress_tag_ = mid_ != 0 || !entries_.empty();
}

namespace {
constexpr std::size_t kInlineStart = 204;
constexpr std::size_t kInlineEnd = kInlineStart + InodeImage::kInlineBytes;  // 3896
constexpr std::size_t kXattrStart = kInlineEnd - InodeImage::kXattrBytes;    // 3696
}  // namespace

Page InodeImage::serialize() const {
  Page p = make_page();
  p[0] = 'D'; p[1] = 'F'; p[2] = 'I'; p[3] = 'N';
  store_u32le(p.data() + 4, ino_);
  std::uint32_t flags = (compress_tag_ ? 1u : 0u) | (static_cast<std::uint32_t>(ctype_) << 1);
  store_u32le(p.data() + 8, flags);
  store_u64le(p.data() + 12, file_size_);
  store_u32le(p.data() + 20, mid_);
  store_u32le(p.data() + 24, bgres_next_);

  std::size_t pos = kInlineStart + kReservedOffsetBytes;
  for (Lba off : offsets_) {
    store_u32le(p.data() + pos, off);
    pos += 4;
  }
  std::memcpy(p.data() + kXattrStart, xattr_.data(), kXattrBytes);

  std::size_t end = kXattrStart;
  for (const auto& e : entries_) {
    store_u16le(p.data() + end - 2, e.page_index);
    p[end - 3] = static_cast<std::uint8_t>(e.bytes.size());
    std::memcpy(p.data() + end - 3 - e.bytes.size(), e.bytes.data(), e.bytes.size());
    end -= e.total();
  }

  store_u32le(p.data() + 3896, crc32(p.data(), 3896));
  return p;
}

InodeImage InodeImage::parse(const Page& p) {
  if (p[0] != 'D' || p[1] != 'F' || p[2] != 'I' || p[3] != 'N') {
    throw CorruptInode("bad inode magic");
  }
  if (load_u32le(p.data() + 3896) != crc32(p.data(), 3896)) {
    throw CorruptInode("inode checksum mismatch");
  }

  InodeImage n;
  n.ino_ = load_u32le(p.data() + 4);
  std::uint32_t flags = load_u32le(p.data() + 8);
  n.compress_tag_ = (flags & 1) != 0;
  std::uint32_t t = (flags >> 1) & 3;
  if (t > 2) throw CorruptInode("bad compress_type");
  n.ctype_ = static_cast<CompressType>(t);
  n.file_size_ = load_u64le(p.data() + 12);
  n.mid_ = load_u32le(p.data() + 20);
  n.bgres_next_ = load_u32le(p.data() + 24);

  std::uint64_t pages = (n.file_size_ + kBlockSize - 1) / kBlockSize;
  if (pages > kMaxFilePages) throw CorruptInode("file size beyond inline-indexable cap");
  n.offsets_.resize(pages);
  std::size_t pos = kInlineStart + kReservedOffsetBytes;
  for (auto& off : n.offsets_) {
    off = load_u32le(p.data() + pos);
    pos += 4;
  }
  std::size_t offsets_end = pos;
  std::memcpy(n.xattr_.data(), p.data() + kXattrStart, kXattrBytes);

  // Entries walk from the xattr boundary toward the offsets; a zero size
  // byte marks the free gap (live entries always have size >= 1).
  std::size_t end = kXattrStart;
  while (end >= offsets_end + kEntryHeaderBytes) {
    std::uint8_t size = p[end - 3];
    if (size == 0) break;
    if (end < offsets_end + kEntryHeaderBytes + size) {
      throw CorruptInode("delta entry overlaps offset array");
    }
    InlineEntry e;
    e.page_index = load_u16le(p.data() + end - 2);
    e.bytes.assign(p.data() + end - 3 - size, p.data() + end - 3);
    n.entries_.push_back(std::move(e));
    end -= kEntryHeaderBytes + size;
  }
  return n;
}

}  // namespace deltafs
