#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deltafs/types.hpp"

namespace deltafs {

// One trace line: `tick op path index payload_kind payload...`
//
//   100 create /f0 0 none
//   101 write  /f0 3 gen 12345 0.035
//   102 write  /f0 3 hex 4142...        (8192 uppercase hex chars)
//   103 read   /f0 3 none
//   104 fsync  -   0 none               (path "-" flushes everything)
//   105 delete /f0 0 none
//   106 idle   -   0 none
//
// Ticks are non-decreasing. `gen seed ud` derives the payload from the
// page's prior content: a run of round(ud * 4096) bytes anchored at a
// position drawn uniformly per (path, page) is re-randomized. A gen write
// to a fresh page fills the whole page from the seed.
struct TraceRecord {
  enum class Op : std::uint8_t { Create, Write, Read, Fsync, Delete, Idle };

  std::uint64_t tick = 0;
  Op op = Op::Create;
  std::string path;
  std::uint32_t page_index = 0;

  enum class PayloadKind : std::uint8_t { None, Hex, Gen };
  PayloadKind payload_kind = PayloadKind::None;
  std::vector<std::uint8_t> hex_payload;
  std::uint64_t gen_seed = 0;
  double gen_ud = 0.0;

  std::size_t line = 0;  // 1-based source line, for diagnostics

  std::string to_line() const;
};

std::vector<TraceRecord> parse_trace(const std::string& text);  // throws TraceParse
std::vector<TraceRecord> load_trace(const std::string& path);
void save_trace(const std::string& path, const std::vector<TraceRecord>& records);

// Materializes a write payload. `prior` is the page's current content
// (nullopt for a fresh page). Deterministic in (record, prior).
Page materialize_payload(const TraceRecord& record, const std::optional<Page>& prior);

struct TraceGenConfig {
  std::size_t files = 40;
  std::uint32_t min_pages = 4;
  std::uint32_t max_pages = 24;
  std::size_t ops = 10000;
  double update_ratio = 0.89;       // UR: updates among writes
  double update_difference = 0.035; // UD: changed-byte fraction per update
  double write_ratio = 0.656;       // writes among phase-2 operations
  std::uint64_t seed = 1;
  std::size_t fsync_every = 300;
  std::size_t idle_every = 1000;
};

// Named parameter sets for the application profiles the generator models.
// Returns false when the name is unknown.
bool apply_preset(const std::string& name, TraceGenConfig& cfg);
std::vector<std::string> preset_names();

// Deterministic synthetic trace: a create/append phase building `files`
// files, then `ops` operations mixing updates, appends, and reads with
// periodic fsync and idle records, closed by a final fsync.
std::vector<TraceRecord> gen_trace(const TraceGenConfig& cfg);

}  // namespace deltafs
