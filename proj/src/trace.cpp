#include "deltafs/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "deltafs/errors.hpp"

namespace deltafs {

namespace {

const char* op_name(TraceRecord::Op op) {
  switch (op) {
    case TraceRecord::Op::Create: return "create";
    case TraceRecord::Op::Write: return "write";
    case TraceRecord::Op::Read: return "read";
    case TraceRecord::Op::Fsync: return "fsync";
    case TraceRecord::Op::Delete: return "delete";
    case TraceRecord::Op::Idle: return "idle";
  }
  return "?";
}

std::optional<TraceRecord::Op> op_from(const std::string& s) {
  if (s == "create") return TraceRecord::Op::Create;
  if (s == "write") return TraceRecord::Op::Write;
  if (s == "read") return TraceRecord::Op::Read;
  if (s == "fsync") return TraceRecord::Op::Fsync;
  if (s == "delete") return TraceRecord::Op::Delete;
  if (s == "idle") return TraceRecord::Op::Idle;
  return std::nullopt;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string TraceRecord::to_line() const {
  std::ostringstream os;
  os << tick << ' ' << op_name(op) << ' ' << (path.empty() ? "-" : path) << ' ' << page_index
     << ' ';
  switch (payload_kind) {
    case PayloadKind::None:
      os << "none";
      break;
    case PayloadKind::Hex: {
      os << "hex ";
      static const char* digits = "0123456789ABCDEF";
      for (std::uint8_t b : hex_payload) {
        os << digits[b >> 4] << digits[b & 0xF];
      }
      break;
    }
    case PayloadKind::Gen: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "gen %llu %.6f",
                    static_cast<unsigned long long>(gen_seed), gen_ud);
      os << buf;
      break;
    }
  }
  return os.str();
}

std::vector<TraceRecord> parse_trace(const std::string& text) {
  std::vector<TraceRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::uint64_t last_tick = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TraceRecord r;
    r.line = lineno;
    std::string op, kind;
    if (!(ls >> r.tick >> op >> r.path >> r.page_index >> kind)) {
      throw TraceParse("line " + std::to_string(lineno) + ": malformed record");
    }
    auto o = op_from(op);
    if (!o) throw TraceParse("line " + std::to_string(lineno) + ": unknown op '" + op + "'");
    r.op = *o;
    if (r.path == "-") r.path.clear();
    if (r.tick < last_tick) {
      throw TraceParse("line " + std::to_string(lineno) + ": ticks must be non-decreasing");
    }
    last_tick = r.tick;

    if (kind == "none") {
      r.payload_kind = TraceRecord::PayloadKind::None;
    } else if (kind == "hex") {
      r.payload_kind = TraceRecord::PayloadKind::Hex;
      std::string hex;
      if (!(ls >> hex) || hex.size() != 2 * kBlockSize) {
        throw TraceParse("line " + std::to_string(lineno) + ": hex payload must be " +
                         std::to_string(2 * kBlockSize) + " digits");
      }
      r.hex_payload.resize(kBlockSize);
      for (std::size_t i = 0; i < kBlockSize; ++i) {
        auto nibble = [&](char c) -> int {
          if (c >= '0' && c <= '9') return c - '0';
          if (c >= 'A' && c <= 'F') return c - 'A' + 10;
          return -1;
        };
        int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
          throw TraceParse("line " + std::to_string(lineno) + ": bad hex digit");
        }
        r.hex_payload[i] = static_cast<std::uint8_t>((hi << 4) | lo);
      }
    } else if (kind == "gen") {
      r.payload_kind = TraceRecord::PayloadKind::Gen;
      if (!(ls >> r.gen_seed >> r.gen_ud) || r.gen_ud < 0.0 || r.gen_ud > 1.0) {
        throw TraceParse("line " + std::to_string(lineno) + ": bad gen payload spec");
      }
    } else {
      throw TraceParse("line " + std::to_string(lineno) + ": unknown payload kind '" + kind +
                       "'");
    }
    if (r.op == TraceRecord::Op::Write &&
        r.payload_kind == TraceRecord::PayloadKind::None) {
      throw TraceParse("line " + std::to_string(lineno) + ": write without payload");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceParse("cannot open trace: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str());
}

void save_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open trace for writing: " + path);
  for (const auto& r : records) out << r.to_line() << '\n';
}

Page materialize_payload(const TraceRecord& record, const std::optional<Page>& prior) {
  if (record.payload_kind == TraceRecord::PayloadKind::Hex) {
    Page p;
    std::copy(record.hex_payload.begin(), record.hex_payload.end(), p.begin());
    return p;
  }
  if (record.payload_kind != TraceRecord::PayloadKind::Gen) {
    throw TraceParse("record carries no payload");
  }
  std::mt19937_64 g(record.gen_seed);
  if (!prior) {
    Page p;
    for (auto& b : p) b = static_cast<std::uint8_t>(g() & 0xFF);
    return p;
  }
  Page p = *prior;
  std::size_t n = static_cast<std::size_t>(std::llround(record.gen_ud * kBlockSize));
  if (n == 0) return p;
  if (n > kBlockSize) n = kBlockSize;
  // The updated run sits at a per-(path, page) anchor so repeated updates of
  // one page keep hitting the same region, the way hot structured files do.
  std::uint64_t h = fnv1a(record.path.data(), record.path.size());
  h = splitmix64(h ^ (std::uint64_t(record.page_index) * 0x9e3779b97f4a7c15ull));
  std::size_t anchor = static_cast<std::size_t>(h % (kBlockSize - n + 1));
  for (std::size_t i = anchor; i < anchor + n; ++i) {
    p[i] = static_cast<std::uint8_t>(p[i] ^ (1 + g() % 255));
  }
  return p;
}

bool apply_preset(const std::string& name, TraceGenConfig& cfg) {
  // UR/UD/write mix from the measured application profiles; file sizes are
  // modeling choices at desk scale.
  struct Preset {
    const char* name;
    double ur, ud, wr;
    std::uint32_t min_pages, max_pages;
  };
  static const Preset presets[] = {
      {"gmail", 0.754, 0.280, 0.961, 4, 128},
      {"polish", 0.652, 0.018, 0.948, 8, 256},
      {"spotify", 0.777, 0.084, 0.987, 8, 128},
      {"telegram", 0.890, 0.035, 0.656, 4, 24},
      {"twitter", 0.786, 0.148, 0.618, 8, 128},
      {"wechat", 0.672, 0.165, 0.755, 4, 64},
      {"zoom", 0.925, 0.131, 0.727, 16, 256},
  };
  for (const auto& p : presets) {
    if (name == p.name) {
      cfg.update_ratio = p.ur;
      cfg.update_difference = p.ud;
      cfg.write_ratio = p.wr;
      cfg.min_pages = p.min_pages;
      cfg.max_pages = p.max_pages;
      return true;
    }
  }
  return false;
}

std::vector<std::string> preset_names() {
  return {"gmail", "polish", "spotify", "telegram", "twitter", "wechat", "zoom"};
}

std::vector<TraceRecord> gen_trace(const TraceGenConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<TraceRecord> out;
  std::uint64_t tick = 0;

  auto emit = [&](TraceRecord r) {
    r.tick = tick++;
    out.push_back(std::move(r));
  };

  struct GenFile {
    std::string path;
    std::uint32_t pages = 0;
    double write_weight = 1.0;
    double read_weight = 1.0;
  };
  std::vector<GenFile> files;

  // File personalities make the hotness clusters non-degenerate: some files
  // soak up writes, some reads, some both, some neither.
  for (std::size_t f = 0; f < cfg.files; ++f) {
    GenFile gf;
    gf.path = "/f" + std::to_string(f);
    gf.pages = cfg.min_pages +
               static_cast<std::uint32_t>(rng() % (cfg.max_pages - cfg.min_pages + 1));
    double u = unit_double(rng);
    if (u < 0.35) {
      gf.write_weight = 8;
      gf.read_weight = 1;
    } else if (u < 0.60) {
      gf.write_weight = 1;
      gf.read_weight = 8;
    } else if (u < 0.80) {
      gf.write_weight = 4;
      gf.read_weight = 4;
    } else {
      gf.write_weight = 1;
      gf.read_weight = 1;
    }
    TraceRecord c;
    c.op = TraceRecord::Op::Create;
    c.path = gf.path;
    emit(std::move(c));
    for (std::uint32_t p = 0; p < gf.pages; ++p) {
      TraceRecord w;
      w.op = TraceRecord::Op::Write;
      w.path = gf.path;
      w.page_index = p;
      w.payload_kind = TraceRecord::PayloadKind::Gen;
      w.gen_seed = rng();
      w.gen_ud = cfg.update_difference;
      emit(std::move(w));
    }
    files.push_back(std::move(gf));
  }
  {
    TraceRecord s;
    s.op = TraceRecord::Op::Fsync;
    emit(std::move(s));
  }

  auto pick_file = [&](bool for_write) -> GenFile& {
    double total = 0;
    for (const auto& f : files) total += for_write ? f.write_weight : f.read_weight;
    double u = unit_double(rng) * total;
    double acc = 0;
    for (auto& f : files) {
      acc += for_write ? f.write_weight : f.read_weight;
      if (u < acc) return f;
    }
    return files.back();
  };
  auto pick_page = [&](const GenFile& f) -> std::uint32_t {
    // Skew toward low indexes: hot head pages get most of the traffic.
    std::uint32_t a = static_cast<std::uint32_t>(rng() % f.pages);
    if (unit_double(rng) < 0.75) {
      std::uint32_t b = static_cast<std::uint32_t>(rng() % f.pages);
      return std::min(a, b);
    }
    return a;
  };

  for (std::size_t i = 0; i < cfg.ops; ++i) {
    if (cfg.idle_every > 0 && i > 0 && i % cfg.idle_every == 0) {
      TraceRecord r;
      r.op = TraceRecord::Op::Idle;
      emit(std::move(r));
    }
    if (cfg.fsync_every > 0 && i > 0 && i % cfg.fsync_every == 0) {
      TraceRecord r;
      r.op = TraceRecord::Op::Fsync;
      emit(std::move(r));
    }
    bool is_write = unit_double(rng) < cfg.write_ratio;
    GenFile& f = pick_file(is_write);
    if (is_write) {
      bool update = unit_double(rng) < cfg.update_ratio;
      TraceRecord w;
      w.op = TraceRecord::Op::Write;
      w.path = f.path;
      w.payload_kind = TraceRecord::PayloadKind::Gen;
      w.gen_seed = rng();
      w.gen_ud = cfg.update_difference;
      if (update || f.pages >= kMaxFilePages) {
        w.page_index = pick_page(f);
      } else {
        w.page_index = f.pages++;
      }
      emit(std::move(w));
    } else {
      TraceRecord r;
      r.op = TraceRecord::Op::Read;
      r.path = f.path;
      r.page_index = pick_page(f);
      emit(std::move(r));
    }
  }
  TraceRecord s;
  s.op = TraceRecord::Op::Fsync;
  emit(std::move(s));
  return out;
}

}  // namespace deltafs
