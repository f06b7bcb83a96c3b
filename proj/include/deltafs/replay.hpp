#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "deltafs/lfs_core.hpp"
#include "deltafs/trace.hpp"

namespace deltafs {

struct MetricsBucket {
  std::uint64_t tick_start = 0;
  std::uint64_t flash_writes = 0;
  std::uint64_t data_hits = 0;
  std::uint64_t data_misses = 0;
  std::uint64_t base_hits = 0;
  std::uint64_t base_misses = 0;
  std::uint64_t inode_hits = 0;
  std::uint64_t inode_misses = 0;
  double modeled_latency_us = 0;

  bool operator==(const MetricsBucket&) const = default;
};

struct MetricsReport {
  std::uint64_t flash_writes_blocks = 0;
  std::uint64_t write_volume_bytes = 0;
  std::uint64_t baseline_writes_blocks = 0;  // paired no-compression replay; 0 if not run
  double normalized_write_volume = 1.0;
  double data_hit_rate = 1.0;
  double base_hit_rate = 1.0;
  double inode_hit_rate = 1.0;
  std::uint64_t inline_delta_count = 0;
  std::uint64_t dcm_delta_count = 0;
  double modeled_total_latency_us = 0;
  std::vector<double> eviction_stalls_us;

  std::uint64_t ops = 0;
  std::uint64_t duration_ticks = 0;
  std::uint64_t compressed_inline = 0;
  std::uint64_t compressed_main = 0;
  std::uint64_t plain_dirty = 0;
  std::uint64_t appended = 0;
  std::uint64_t reads = 0;
  std::uint64_t bgres_restored_pages = 0;
  std::uint64_t device_reads = 0;
  std::uint64_t device_erases = 0;

  std::vector<MetricsBucket> buckets;  // one row per 1000 ticks

  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  std::string human() const;
  std::string csv() const;
  std::string json_lines() const;
  static MetricsReport from_json_lines(const std::string& text);

  bool operator==(const MetricsReport&) const = default;
};

// Deterministic trace replayer: executes records in order against a fresh
// file system; idle records trigger background restoration and a cleaning
// pass. With `with_baseline`, the same trace is replayed a second time with
// compression disabled to normalize the write volume.
class Replayer {
 public:
  Replayer(const FsConfig& fs_config, const DeviceGeometry& geom)
      : fs_config_(fs_config), geom_(geom) {}

  // Runs background restoration every `ticks` ticks in addition to explicit
  // idle records. 0 leaves it to the trace.
  void set_bgres_interval(std::uint64_t ticks) { bgres_interval_ = ticks; }

  MetricsReport run(const std::vector<TraceRecord>& records, bool with_baseline = true);

  // Per-write outcome sequence of the last run (compression-enabled pass).
  const std::vector<WriteOutcome>& outcomes() const { return outcomes_; }

  // File system of the last enabled pass; valid until the next run.
  LfsCore& fs() { return *fs_; }

 private:
  std::uint64_t execute(const std::vector<TraceRecord>& records, LfsCore& fs,
                        MetricsReport* report);

  FsConfig fs_config_;
  DeviceGeometry geom_;
  std::uint64_t bgres_interval_ = 0;
  std::unique_ptr<LfsCore> fs_;
  std::vector<WriteOutcome> outcomes_;
};

}  // namespace deltafs
