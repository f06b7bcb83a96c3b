#include "deltafs/replay.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "deltafs/errors.hpp"

namespace deltafs {

namespace {

using nlohmann::json;

json bucket_to_json(const MetricsBucket& b) {
  return json{{"tick_start", b.tick_start},
              {"flash_writes", b.flash_writes},
              {"data_hits", b.data_hits},
              {"data_misses", b.data_misses},
              {"base_hits", b.base_hits},
              {"base_misses", b.base_misses},
              {"inode_hits", b.inode_hits},
              {"inode_misses", b.inode_misses},
              {"modeled_latency_us", b.modeled_latency_us}};
}

MetricsBucket bucket_from_json(const json& j) {
  MetricsBucket b;
  b.tick_start = j.at("tick_start").get<std::uint64_t>();
  b.flash_writes = j.at("flash_writes").get<std::uint64_t>();
  b.data_hits = j.at("data_hits").get<std::uint64_t>();
  b.data_misses = j.at("data_misses").get<std::uint64_t>();
  b.base_hits = j.at("base_hits").get<std::uint64_t>();
  b.base_misses = j.at("base_misses").get<std::uint64_t>();
  b.inode_hits = j.at("inode_hits").get<std::uint64_t>();
  b.inode_misses = j.at("inode_misses").get<std::uint64_t>();
  b.modeled_latency_us = j.at("modeled_latency_us").get<double>();
  return b;
}

json summary_to_json(const MetricsReport& r) {
  return json{{"flash_writes_blocks", r.flash_writes_blocks},
              {"write_volume_bytes", r.write_volume_bytes},
              {"baseline_writes_blocks", r.baseline_writes_blocks},
              {"normalized_write_volume", r.normalized_write_volume},
              {"data_hit_rate", r.data_hit_rate},
              {"base_hit_rate", r.base_hit_rate},
              {"inode_hit_rate", r.inode_hit_rate},
              {"inline_delta_count", r.inline_delta_count},
              {"dcm_delta_count", r.dcm_delta_count},
              {"modeled_total_latency_us", r.modeled_total_latency_us},
              {"eviction_stalls_us", r.eviction_stalls_us},
              {"ops", r.ops},
              {"duration_ticks", r.duration_ticks},
              {"compressed_inline", r.compressed_inline},
              {"compressed_main", r.compressed_main},
              {"plain_dirty", r.plain_dirty},
              {"appended", r.appended},
              {"reads", r.reads},
              {"bgres_restored_pages", r.bgres_restored_pages},
              {"device_reads", r.device_reads},
              {"device_erases", r.device_erases}};
}

void summary_from_json(const json& j, MetricsReport& r) {
  r.flash_writes_blocks = j.at("flash_writes_blocks").get<std::uint64_t>();
  r.write_volume_bytes = j.at("write_volume_bytes").get<std::uint64_t>();
  r.baseline_writes_blocks = j.at("baseline_writes_blocks").get<std::uint64_t>();
  r.normalized_write_volume = j.at("normalized_write_volume").get<double>();
  r.data_hit_rate = j.at("data_hit_rate").get<double>();
  r.base_hit_rate = j.at("base_hit_rate").get<double>();
  r.inode_hit_rate = j.at("inode_hit_rate").get<double>();
  r.inline_delta_count = j.at("inline_delta_count").get<std::uint64_t>();
  r.dcm_delta_count = j.at("dcm_delta_count").get<std::uint64_t>();
  r.modeled_total_latency_us = j.at("modeled_total_latency_us").get<double>();
  r.eviction_stalls_us = j.at("eviction_stalls_us").get<std::vector<double>>();
  r.ops = j.at("ops").get<std::uint64_t>();
  r.duration_ticks = j.at("duration_ticks").get<std::uint64_t>();
  r.compressed_inline = j.at("compressed_inline").get<std::uint64_t>();
  r.compressed_main = j.at("compressed_main").get<std::uint64_t>();
  r.plain_dirty = j.at("plain_dirty").get<std::uint64_t>();
  r.appended = j.at("appended").get<std::uint64_t>();
  r.reads = j.at("reads").get<std::uint64_t>();
  r.bgres_restored_pages = j.at("bgres_restored_pages").get<std::uint64_t>();
  r.device_reads = j.at("device_reads").get<std::uint64_t>();
  r.device_erases = j.at("device_erases").get<std::uint64_t>();
}

}  // namespace

std::string MetricsReport::to_json() const {
  json j = summary_to_json(*this);
  json bs = json::array();
  for (const auto& b : buckets) bs.push_back(bucket_to_json(b));
  j["buckets"] = std::move(bs);
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  json j = json::parse(text);
  MetricsReport r;
  summary_from_json(j, r);
  for (const auto& b : j.at("buckets")) r.buckets.push_back(bucket_from_json(b));
  return r;
}

std::string MetricsReport::human() const {
  std::ostringstream os;
  char buf[128];
  os << "flash writes:            " << flash_writes_blocks << " blocks (" << write_volume_bytes
     << " bytes)\n";
  if (baseline_writes_blocks > 0) {
    os << "no-compression baseline: " << baseline_writes_blocks << " blocks\n";
  }
  std::snprintf(buf, sizeof(buf), "normalized write volume: %.3f\n", normalized_write_volume);
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "cache hit rates:         data %.4f  base %.4f  inode %.4f\n", data_hit_rate,
                base_hit_rate, inode_hit_rate);
  os << buf;
  os << "live deltas:             " << inline_delta_count << " inline, " << dcm_delta_count
     << " main-area\n";
  std::snprintf(buf, sizeof(buf), "modeled latency:         %.1f us\n",
                modeled_total_latency_us);
  os << buf;
  os << "write outcomes:          " << compressed_inline << " inline, " << compressed_main
     << " main, " << plain_dirty << " plain, " << appended << " appended\n";
  os << "reads:                   " << reads << "\n";
  os << "bgres restored pages:    " << bgres_restored_pages << "\n";
  os << "device reads/erases:     " << device_reads << "/" << device_erases << "\n";
  if (eviction_stalls_us.empty()) {
    os << "delta eviction stalls:   none\n";
  } else {
    double mn = eviction_stalls_us[0], mx = eviction_stalls_us[0], sum = 0;
    for (double s : eviction_stalls_us) {
      mn = std::min(mn, s);
      mx = std::max(mx, s);
      sum += s;
    }
    std::snprintf(buf, sizeof(buf),
                  "delta eviction stalls:   %zu (min %.1f us, mean %.1f us, max %.1f us)\n",
                  eviction_stalls_us.size(), mn, sum / eviction_stalls_us.size(), mx);
    os << buf;
  }
  os << "ops replayed:            " << ops << " over " << duration_ticks << " ticks\n";
  return os.str();
}

std::string MetricsReport::csv() const {
  std::ostringstream os;
  os << "tick_start,flash_writes,data_hits,data_misses,base_hits,base_misses,"
        "inode_hits,inode_misses,modeled_latency_us\n";
  char buf[64];
  for (const auto& b : buckets) {
    std::snprintf(buf, sizeof(buf), "%.3f", b.modeled_latency_us);
    os << b.tick_start << ',' << b.flash_writes << ',' << b.data_hits << ',' << b.data_misses
       << ',' << b.base_hits << ',' << b.base_misses << ',' << b.inode_hits << ','
       << b.inode_misses << ',' << buf << '\n';
  }
  return os.str();
}

std::string MetricsReport::json_lines() const {
  std::ostringstream os;
  json summary = summary_to_json(*this);
  summary["record"] = "summary";
  os << summary.dump() << '\n';
  for (const auto& b : buckets) {
    json row = bucket_to_json(b);
    row["record"] = "bucket";
    os << row.dump() << '\n';
  }
  return os.str();
}

MetricsReport MetricsReport::from_json_lines(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    std::string kind = j.at("record").get<std::string>();
    if (kind == "summary") {
      summary_from_json(j, r);
    } else if (kind == "bucket") {
      r.buckets.push_back(bucket_from_json(j));
    }
  }
  return r;
}

std::uint64_t Replayer::execute(const std::vector<TraceRecord>& records, LfsCore& fs,
                                MetricsReport* report) {
  std::map<std::string, FileHandle> handles;
  auto handle_of = [&](const TraceRecord& r) -> FileHandle& {
    auto it = handles.find(r.path);
    if (it == handles.end()) {
      throw TraceParse("line " + std::to_string(r.line) + ": unknown file " + r.path);
    }
    return it->second;
  };

  struct Snapshot {
    std::uint64_t writes = 0, dh = 0, dm = 0, bh = 0, bm = 0, ih = 0, im = 0;
    double latency = 0;
  };
  auto snap = [&fs]() {
    const CacheStats& s = fs.cache().stats();
    return Snapshot{fs.device().write_count(), s.data_hits,  s.data_misses,
                    s.base_hits,               s.base_misses, s.inode_hits,
                    s.inode_misses,            fs.accounting().total_us};
  };
  Snapshot bucket_start = snap();
  std::uint64_t bucket = 0;
  auto close_buckets_until = [&](std::uint64_t new_bucket) {
    if (!report) return;
    Snapshot now = snap();
    MetricsBucket row;
    row.tick_start = bucket * 1000;
    row.flash_writes = now.writes - bucket_start.writes;
    row.data_hits = now.dh - bucket_start.dh;
    row.data_misses = now.dm - bucket_start.dm;
    row.base_hits = now.bh - bucket_start.bh;
    row.base_misses = now.bm - bucket_start.bm;
    row.inode_hits = now.ih - bucket_start.ih;
    row.inode_misses = now.im - bucket_start.im;
    row.modeled_latency_us = now.latency - bucket_start.latency;
    report->buckets.push_back(row);
    for (std::uint64_t b = bucket + 1; b < new_bucket; ++b) {
      MetricsBucket empty;
      empty.tick_start = b * 1000;
      report->buckets.push_back(empty);
    }
    bucket_start = now;
    bucket = new_bucket;
  };

  std::uint64_t last_tick = 0;
  std::uint64_t next_bgres = bgres_interval_;
  for (const auto& r : records) {
    last_tick = r.tick;
    if (r.tick / 1000 != bucket) close_buckets_until(r.tick / 1000);
    fs.advance_clock(r.tick);
    if (bgres_interval_ > 0 && r.tick >= next_bgres) {
      fs.run_bgres(fs.config().bgres_budget);
      fs.idle_clean();
      next_bgres = r.tick - (r.tick % bgres_interval_) + bgres_interval_;
    }
    switch (r.op) {
      case TraceRecord::Op::Create:
        handles[r.path] = fs.create(r.path);
        break;
      case TraceRecord::Op::Write: {
        FileHandle& h = handle_of(r);
        std::optional<Page> prior;
        if (r.payload_kind == TraceRecord::PayloadKind::Gen &&
            r.page_index < fs.file_size(h) / kBlockSize) {
          prior = fs.peek_page(h, r.page_index);
        }
        Page payload = materialize_payload(r, prior);
        WriteOutcome o = fs.write_page(h, r.page_index, payload);
        if (report) outcomes_.push_back(o);
        break;
      }
      case TraceRecord::Op::Read:
        (void)fs.read_page(handle_of(r), r.page_index);
        break;
      case TraceRecord::Op::Fsync:
        if (r.path.empty()) {
          fs.flush_all();
        } else {
          fs.fsync(handle_of(r));
        }
        break;
      case TraceRecord::Op::Delete:
        fs.remove(r.path);
        handles.erase(r.path);
        break;
      case TraceRecord::Op::Idle:
        fs.run_bgres(fs.config().bgres_budget);
        fs.idle_clean();
        break;
    }
  }
  close_buckets_until(bucket + 1);
  return last_tick + (records.empty() ? 0 : 1);
}

MetricsReport Replayer::run(const std::vector<TraceRecord>& records, bool with_baseline) {
  MetricsReport report;
  outcomes_.clear();

  fs_ = std::make_unique<LfsCore>(geom_, fs_config_);
  report.duration_ticks = execute(records, *fs_, &report);
  report.ops = records.size();

  const CacheStats& stats = fs_->cache().stats();
  report.flash_writes_blocks = fs_->device().write_count();
  report.write_volume_bytes = report.flash_writes_blocks * kBlockSize;
  report.data_hit_rate = stats.data_hit_rate();
  report.base_hit_rate = stats.base_hit_rate();
  report.inode_hit_rate = stats.inode_hit_rate();
  report.inline_delta_count = fs_->inline_delta_count();
  report.dcm_delta_count = fs_->dcm_delta_count();
  report.modeled_total_latency_us = fs_->accounting().total_us;
  report.eviction_stalls_us = fs_->accounting().eviction_stalls_us;
  report.compressed_inline = fs_->accounting().compressed_inline;
  report.compressed_main = fs_->accounting().compressed_main;
  report.plain_dirty = fs_->accounting().plain_dirty;
  report.appended = fs_->accounting().appended;
  report.reads = fs_->accounting().reads;
  report.bgres_restored_pages = fs_->accounting().bgres_restored_pages;
  report.device_reads = fs_->device().read_count();
  report.device_erases = fs_->device().erase_count();

  if (with_baseline) {
    FsConfig base_cfg = fs_config_;
    base_cfg.compress = false;
    LfsCore baseline(geom_, base_cfg);
    execute(records, baseline, nullptr);
    report.baseline_writes_blocks = baseline.device().write_count();
    if (report.baseline_writes_blocks > 0) {
      report.normalized_write_volume = static_cast<double>(report.flash_writes_blocks) /
                                       static_cast<double>(report.baseline_writes_blocks);
    }
  }
  return report;
}

}  // namespace deltafs
