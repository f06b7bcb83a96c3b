#include "deltafs/block_device.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "deltafs/errors.hpp"

namespace deltafs {

BlockDevice::BlockDevice(std::uint32_t segment_count, std::uint32_t blocks_per_segment)
    : segment_count_(segment_count),
      blocks_per_segment_(blocks_per_segment),
      states_(std::size_t(segment_count) * blocks_per_segment, BlockState::Free),
      stamps_(std::size_t(segment_count) * blocks_per_segment, 0) {}

Lba BlockDevice::try_place(const Page& payload) {
  if (!active_segment_ || active_offset_ >= blocks_per_segment_) {
    // Open the lowest-indexed fully-free segment.
    active_segment_.reset();
    for (std::uint32_t seg = 0; seg < segment_count_; ++seg) {
      bool all_free = true;
      for (std::uint32_t b = 0; b < blocks_per_segment_ && all_free; ++b) {
        all_free = states_[std::size_t(seg) * blocks_per_segment_ + b] == BlockState::Free;
      }
      if (all_free) {
        active_segment_ = seg;
        active_offset_ = 0;
        break;
      }
    }
    if (!active_segment_) return kNullLba;
  }
  Lba lba = *active_segment_ * blocks_per_segment_ + active_offset_;
  ++active_offset_;
  states_[lba] = BlockState::Valid;
  stamps_[lba] = ++stamp_counter_;
  payloads_[lba] = payload;
  ++write_count_;
  return lba;
}

Lba BlockDevice::alloc_and_write(const Page& payload) {
  Lba lba = try_place(payload);
  if (lba != kNullLba) return lba;
  try {
    clean_segment();
  } catch (const NothingToClean&) {
    throw DeviceFull("no free block and nothing to clean");
  }
  lba = try_place(payload);
  if (lba == kNullLba) throw DeviceFull("cleaning yielded no free segment");
  return lba;
}

Page BlockDevice::read(Lba lba) const {
  if (lba >= states_.size() || states_[lba] != BlockState::Valid) {
    throw InvalidRead("read of non-valid lba " + std::to_string(lba));
  }
  ++read_count_;
  return payloads_.at(lba);
}

void BlockDevice::invalidate(Lba lba) {
  if (lba >= states_.size() || states_[lba] != BlockState::Valid) {
    throw InvalidState("invalidate of non-valid lba " + std::to_string(lba));
  }
  states_[lba] = BlockState::Invalid;
}

std::optional<std::uint32_t> BlockDevice::pick_victim() const {
  std::optional<std::uint32_t> best;
  std::size_t best_invalid = 0;
  for (std::uint32_t seg = 0; seg < segment_count_; ++seg) {
    std::size_t invalid = 0;
    bool has_pinned_valid = false;
    for (std::uint32_t b = 0; b < blocks_per_segment_; ++b) {
      Lba lba = seg * blocks_per_segment_ + b;
      if (states_[lba] == BlockState::Invalid) ++invalid;
      if (states_[lba] == BlockState::Valid && pinned_.count(lba)) has_pinned_valid = true;
    }
    if (invalid == 0 || has_pinned_valid) continue;
    if (!best || invalid > best_invalid) {
      best = seg;
      best_invalid = invalid;
    }
  }
  return best;
}

void BlockDevice::erase_segment(std::uint32_t seg) {
  for (std::uint32_t b = 0; b < blocks_per_segment_; ++b) {
    Lba lba = seg * blocks_per_segment_ + b;
    states_[lba] = BlockState::Free;
    stamps_[lba] = 0;
    payloads_.erase(lba);
  }
  ++erase_count_;
}

std::size_t BlockDevice::clean_segment() {
  std::optional<std::uint32_t> victim = pick_victim();
  if (!victim) throw NothingToClean("no segment contains an invalid block");

  std::vector<std::pair<Lba, Page>> survivors;
  std::size_t reclaimed = 0;
  for (std::uint32_t b = 0; b < blocks_per_segment_; ++b) {
    Lba lba = *victim * blocks_per_segment_ + b;
    if (states_[lba] == BlockState::Valid) {
      survivors.emplace_back(lba, payloads_.at(lba));
    } else if (states_[lba] == BlockState::Invalid) {
      ++reclaimed;
    }
  }

  // Erase first so the victim's own space can host the relocated copies;
  // the victim always has room for its survivors.
  if (active_segment_ && *active_segment_ == *victim) active_segment_.reset();
  erase_segment(*victim);

  for (const auto& [old_lba, payload] : survivors) {
    Lba new_lba = try_place(payload);
    if (new_lba == kNullLba) throw DeviceFull("no room to relocate during cleaning");
    if (on_relocate_) on_relocate_(old_lba, new_lba);
  }
  return reclaimed;
}

void BlockDevice::overwrite(Lba lba, const Page& payload) {
  if (lba >= states_.size() || states_[lba] != BlockState::Valid) {
    throw InvalidState("overwrite of non-valid lba " + std::to_string(lba));
  }
  if (!pinned_.count(lba)) {
    throw InvalidState("overwrite of unpinned lba " + std::to_string(lba));
  }
  // Stamps track log allocation order; an in-place rewrite keeps its slot.
  payloads_[lba] = payload;
  ++write_count_;
}

BlockState BlockDevice::state(Lba lba) const {
  if (lba >= states_.size()) throw InvalidState("lba out of range");
  return states_[lba];
}

std::size_t BlockDevice::count_state(BlockState s) const {
  return std::count(states_.begin(), states_.end(), s);
}

std::uint64_t BlockDevice::write_stamp(Lba lba) const {
  if (lba >= stamps_.size()) throw InvalidState("lba out of range");
  return stamps_[lba];
}

namespace {
constexpr char kImageMagic[8] = {'D', 'F', 'S', 'I', 'M', 'G', '0', '1'};
}

void BlockDevice::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open image for writing: " + path);
  std::uint8_t header[16];
  std::memcpy(header, kImageMagic, 8);
  store_u32le(header + 8, static_cast<std::uint32_t>(kBlockSize));
  store_u32le(header + 12, segment_count_);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));

  Page zero = make_page();
  for (Lba lba = 0; lba < capacity_blocks(); ++lba) {
    auto it = payloads_.find(lba);
    const Page& p = it == payloads_.end() ? zero : it->second;
    out.write(reinterpret_cast<const char*>(p.data()), kBlockSize);
  }

  std::vector<std::uint8_t> bitmap((capacity_blocks() + 3) / 4, 0);
  for (Lba lba = 0; lba < capacity_blocks(); ++lba) {
    bitmap[lba >> 2] |= static_cast<std::uint8_t>(states_[lba]) << ((lba & 3) * 2);
  }
  out.write(reinterpret_cast<const char*>(bitmap.data()),
            static_cast<std::streamsize>(bitmap.size()));
  if (!out) throw Error("short write saving image: " + path);
}

BlockDevice BlockDevice::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open image: " + path);
  std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);

  std::uint8_t header[16];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(header, kImageMagic, 8) != 0) throw Error("bad image magic");
  std::uint32_t block_size = load_u32le(header + 8);
  std::uint32_t segment_count = load_u32le(header + 12);
  if (block_size != kBlockSize || segment_count == 0) throw Error("bad image geometry");

  // blocks_per_segment is not in the header; derive it from the file size:
  // size = 16 + total*4096 + ceil(total/4).
  std::uint64_t body = file_size - 16;
  std::uint64_t total = (body * 4) / (4 * kBlockSize + 1);
  while (total > 0 && 16 + total * kBlockSize + (total + 3) / 4 > file_size) --total;
  if (total == 0 || 16 + total * kBlockSize + (total + 3) / 4 != file_size ||
      total % segment_count != 0) {
    throw Error("image size inconsistent with geometry");
  }

  BlockDevice dev(segment_count, static_cast<std::uint32_t>(total / segment_count));
  std::vector<Page> raw(total);
  for (auto& p : raw) in.read(reinterpret_cast<char*>(p.data()), kBlockSize);
  std::vector<std::uint8_t> bitmap((total + 3) / 4);
  in.read(reinterpret_cast<char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
  if (!in) throw Error("short read loading image");

  for (Lba lba = 0; lba < total; ++lba) {
    auto s = static_cast<BlockState>((bitmap[lba >> 2] >> ((lba & 3) * 2)) & 3);
    if (s == BlockState::Free) continue;
    dev.states_[lba] = s;
    dev.payloads_[lba] = raw[lba];
  }

  // Re-open the one segment (if any) that has used blocks followed by free
  // blocks; the next write continues there.
  for (std::uint32_t seg = 0; seg < segment_count; ++seg) {
    std::uint32_t used = 0;
    for (std::uint32_t b = 0; b < dev.blocks_per_segment_; ++b) {
      if (dev.states_[seg * dev.blocks_per_segment_ + b] != BlockState::Free) used = b + 1;
    }
    if (used > 0 && used < dev.blocks_per_segment_) {
      dev.active_segment_ = seg;
      dev.active_offset_ = used;
      break;
    }
  }
  return dev;
}

}  // namespace deltafs
