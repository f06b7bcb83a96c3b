#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "deltafs/delta_codec.hpp"
#include "deltafs/errors.hpp"

using namespace deltafs;

namespace {

const ZeroRleCodec codec;

Page random_page(std::mt19937_64& rng) {
  Page p;
  for (auto& b : p) b = static_cast<std::uint8_t>(rng() & 0xFF);
  return p;
}

// Independent size-bound arithmetic: counts maximal zero/non-zero runs the
// way the encoding sees them.
std::pair<std::size_t, std::size_t> literal_bytes_and_runs(const Page& x) {
  std::size_t k = 0, runs = 0;
  bool in_zero = true;
  bool first = true;
  for (std::uint8_t b : x) {
    bool zero = b == 0;
    if (first || zero != in_zero) ++runs;
    in_zero = zero;
    first = false;
    if (!zero) ++k;
  }
  return {k, runs};
}

}  // namespace

TEST_CASE("identical pages compress to the 3-byte zero-run token") {
  Page a = make_page(0x5A);
  DeltaPayload d = delta_encode(a, a, codec);
  CHECK(d.size() == 3);
  CHECK(delta_apply(a, d, codec) == a);
}

TEST_CASE("single differing byte stays under 8 bytes anywhere in the page") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 64; ++i) {
    Page base = random_page(rng);
    Page next = base;
    std::size_t pos = rng() % kBlockSize;
    next[pos] ^= 0x01;
    DeltaPayload d = delta_encode(base, next, codec);
    CHECK(d.size() <= 8);
    CHECK(delta_apply(base, d, codec) == next);
  }
  // Boundary positions.
  for (std::size_t pos : {std::size_t(0), kBlockSize - 1}) {
    Page base = make_page(0);
    Page next = base;
    next[pos] = 0xFF;
    CHECK(delta_encode(base, next, codec).size() <= 8);
  }
}

TEST_CASE("random incompressible page is DCI-ineligible") {
  std::mt19937_64 rng(42);
  Page base = make_page(0);
  Page next = random_page(rng);
  DeltaPayload d = delta_encode(base, next, codec);
  CHECK(d.size() > 256);
  CHECK(delta_apply(base, d, codec) == next);
}

TEST_CASE("round trip and involution over random pairs") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 500; ++i) {
    Page base = random_page(rng);
    Page next = base;
    std::size_t edits = rng() % 200;
    for (std::size_t e = 0; e < edits; ++e) {
      next[rng() % kBlockSize] = static_cast<std::uint8_t>(rng() & 0xFF);
    }
    DeltaPayload d = delta_encode(base, next, codec);
    CHECK(delta_apply(base, d, codec) == next);
    CHECK(recover_base(next, d, codec) == base);
  }
}

TEST_CASE("zero delta applies as identity and recover_base round-trips") {
  Page base = make_page(0xA7);
  DeltaPayload zero = delta_encode(base, base, codec);
  CHECK(delta_apply(base, zero, codec) == base);
  CHECK(recover_base(base, zero, codec) == base);
}

TEST_CASE("two-step re-update recovers the flash base each time") {
  std::mt19937_64 rng(99);
  Page flash_base = random_page(rng);
  Page v1 = flash_base;
  v1[100] ^= 0x11;
  DeltaPayload d1 = delta_encode(flash_base, v1, codec);
  // Update the compressed page again: Base comes from the cached New.
  CHECK(recover_base(v1, d1, codec) == flash_base);
  Page v2 = v1;
  v2[200] ^= 0x22;
  DeltaPayload d2 = delta_encode(recover_base(v1, d1, codec), v2, codec);
  CHECK(delta_apply(flash_base, d2, codec) == v2);
  CHECK(recover_base(v2, d2, codec) == flash_base);
}

TEST_CASE("truncated delta bytes raise CorruptDelta") {
  Page base = make_page(1);
  Page next = make_page(2);
  DeltaPayload d = delta_encode(base, next, codec);
  REQUIRE(d.size() > 1);
  DeltaPayload cut{std::vector<std::uint8_t>(d.bytes.begin(), d.bytes.end() - 1)};
  CHECK_THROWS_AS(delta_apply(base, cut, codec), CorruptDelta);
  DeltaPayload wrong{{0x00, 0x01, 0xAA}};  // decodes to 1 byte, not a page
  CHECK_THROWS_AS(delta_apply(base, wrong, codec), CorruptDelta);
}

TEST_CASE("codec identity on arbitrary buffers") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    std::size_t len = rng() % 5000;
    std::vector<std::uint8_t> buf(len);
    int mode = static_cast<int>(rng() % 3);
    for (auto& b : buf) {
      if (mode == 0) b = static_cast<std::uint8_t>(rng() & 0xFF);
      if (mode == 1) b = (rng() % 10 == 0) ? static_cast<std::uint8_t>(rng() & 0xFF) : 0;
      if (mode == 2) b = 0;
    }
    auto enc = codec.compress(buf.data(), buf.size());
    auto dec = codec.decompress(enc.data(), enc.size());
    CHECK(dec == buf);
  }
}

TEST_CASE("encoded size bound: 3(r+1) + k over the buffer's runs") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    Page x = make_page(0);
    std::size_t burst_count = rng() % 20;
    for (std::size_t b = 0; b < burst_count; ++b) {
      std::size_t start = rng() % kBlockSize;
      std::size_t len = 1 + rng() % 300;
      for (std::size_t j = start; j < std::min(start + len, kBlockSize); ++j) {
        x[j] = static_cast<std::uint8_t>(1 + (rng() % 255));
      }
    }
    auto [k, runs] = literal_bytes_and_runs(x);
    auto enc = codec.compress(x.data(), x.size());
    CHECK(enc.size() <= 3 * (runs + 1) + k);
  }
}
