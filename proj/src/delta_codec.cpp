#include "deltafs/delta_codec.hpp"

#include "deltafs/errors.hpp"

namespace deltafs {

namespace {

void put_varint(std::vector<std::uint8_t>& out, std::size_t v) {
  while (v > 0x7F) {
    out.push_back(static_cast<std::uint8_t>(0x80 | (v & 0x7F)));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::size_t get_varint(const std::uint8_t* data, std::size_t len, std::size_t& pos) {
  std::size_t v = 0;
  int shift = 0;
  for (;;) {
    if (pos >= len) throw CorruptDelta("truncated varint");
    if (shift > 56) throw CorruptDelta("varint overflow");
    std::uint8_t b = data[pos++];
    v |= static_cast<std::size_t>(b & 0x7F) << shift;
    if ((b & 0x80) == 0) return v;
    shift += 7;
  }
}

}  // namespace

std::vector<std::uint8_t> ZeroRleCodec::compress(const std::uint8_t* data,
                                                 std::size_t len) const {
  std::vector<std::uint8_t> out;
  std::size_t pos = 0;
  while (pos < len || len == 0) {
    std::size_t zero_start = pos;
    while (pos < len && data[pos] == 0) ++pos;
    std::size_t zeros = pos - zero_start;
    std::size_t lit_start = pos;
    while (pos < len && data[pos] != 0) ++pos;
    std::size_t lits = pos - lit_start;
    put_varint(out, zeros);
    put_varint(out, lits);
    out.insert(out.end(), data + lit_start, data + lit_start + lits);
    if (len == 0) break;
  }
  return out;
}

std::vector<std::uint8_t> ZeroRleCodec::decompress(const std::uint8_t* data,
                                                   std::size_t len) const {
  std::vector<std::uint8_t> out;
  std::size_t pos = 0;
  while (pos < len) {
    std::size_t zeros = get_varint(data, len, pos);
    std::size_t lits = get_varint(data, len, pos);
    if (pos + lits > len) throw CorruptDelta("truncated literal run");
    if (out.size() + zeros + lits > (1u << 24)) throw CorruptDelta("output too large");
    out.insert(out.end(), zeros, 0);
    out.insert(out.end(), data + pos, data + pos + lits);
    pos += lits;
  }
  return out;
}

DeltaPayload delta_encode(const Page& base, const Page& next, const Compressor& codec) {
  Page x;
  for (std::size_t i = 0; i < kBlockSize; ++i) x[i] = base[i] ^ next[i];
  return DeltaPayload{codec.compress(x.data(), x.size())};
}

Page delta_apply(const Page& base, const DeltaPayload& delta, const Compressor& codec) {
  std::vector<std::uint8_t> x = codec.decompress(delta.bytes.data(), delta.bytes.size());
  if (x.size() != kBlockSize) throw CorruptDelta("delta does not decode to one page");
  Page out;
  for (std::size_t i = 0; i < kBlockSize; ++i) out[i] = base[i] ^ x[i];
  return out;
}

Page recover_base(const Page& next, const DeltaPayload& delta, const Compressor& codec) {
  // XOR is an involution, so recovering Base from New is the same walk.
  return delta_apply(next, delta, codec);
}

}  // namespace deltafs
