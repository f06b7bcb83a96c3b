// deltafs command-line driver: synthetic trace generation, trace replay
// against the simulated file system, metrics reporting, and image checking.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "deltafs/errors.hpp"
#include "deltafs/lfs_core.hpp"
#include "deltafs/replay.hpp"
#include "deltafs/trace.hpp"

using namespace deltafs;

namespace {

struct HarnessConfig {
  FsConfig fs;
  DeviceGeometry geom;
  std::uint64_t bgres_interval = 0;
};

// key=value (or "key value") lines; '#' starts a comment.
HarnessConfig load_config(const std::string& path) {
  HarnessConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    for (auto& c : line) {
      if (c == '=') c = ' ';
    }
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    double value;
    if (!(ls >> value)) {
      throw Error("config line " + std::to_string(lineno) + ": missing value for " + key);
    }
    if (key == "cache_pages") cfg.fs.cache_pages = static_cast<std::size_t>(value);
    else if (key == "inline_alpha") cfg.fs.latency.alpha_bytes = value;
    else if (key == "beta_us") cfg.fs.latency.beta_us = value;
    else if (key == "gamma_us") cfg.fs.latency.gamma_us = value;
    else if (key == "epsilon_us") cfg.fs.latency.epsilon_us = value;
    else if (key == "lambda_us") cfg.fs.latency.lambda_us = value;
    else if (key == "delta_miss_us") cfg.fs.latency.delta_miss_us = value;
    else if (key == "hcluster_window_T") cfg.fs.hcluster_window = static_cast<std::uint64_t>(value);
    else if (key == "hcluster_seed") cfg.fs.hcluster_seed = static_cast<std::uint64_t>(value);
    else if (key == "bgres_interval") cfg.bgres_interval = static_cast<std::uint64_t>(value);
    else if (key == "bgres_budget") cfg.fs.bgres_budget = static_cast<std::size_t>(value);
    else if (key == "dcm_threshold") cfg.fs.dcm_threshold = static_cast<int>(value);
    else if (key == "forced_hr") cfg.fs.forced_hr = value;
    else if (key == "segments") cfg.geom.segment_count = static_cast<std::uint32_t>(value);
    else if (key == "blocks_per_segment")
      cfg.geom.blocks_per_segment = static_cast<std::uint32_t>(value);
    else throw Error("config line " + std::to_string(lineno) + ": unknown key " + key);
  }
  return cfg;
}

int cmd_gen_trace(const std::string& preset, TraceGenConfig cfg, const std::string& out) {
  if (!preset.empty() && !apply_preset(preset, cfg)) {
    std::cerr << "unknown preset '" << preset << "'; known:";
    for (const auto& n : preset_names()) std::cerr << ' ' << n;
    std::cerr << '\n';
    return 2;
  }
  if (const char* env = std::getenv("DELTAFS_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  auto records = gen_trace(cfg);
  save_trace(out, records);
  std::cout << "wrote " << records.size() << " records to " << out << '\n';
  return 0;
}

int cmd_replay(const std::string& trace_path, const std::string& config_path,
               const std::string& image, const std::string& metrics_out,
               const std::string& csv_out, bool no_compress, bool no_baseline) {
  HarnessConfig cfg = load_config(config_path);
  cfg.fs.compress = !no_compress;
  auto records = load_trace(trace_path);
  Replayer replayer(cfg.fs, cfg.geom);
  replayer.set_bgres_interval(cfg.bgres_interval);
  MetricsReport report = replayer.run(records, !no_baseline && !no_compress);

  std::cout << report.human();
  if (!metrics_out.empty()) {
    std::ofstream out(metrics_out, std::ios::trunc);
    out << report.to_json() << '\n';
    std::cout << "metrics written to " << metrics_out << '\n';
  }
  if (!csv_out.empty()) {
    std::ofstream out(csv_out, std::ios::trunc);
    out << report.csv();
    std::cout << "csv written to " << csv_out << '\n';
  }
  if (!image.empty()) {
    replayer.fs().save(image);
    std::cout << "image written to " << image << '\n';
  }
  return 0;
}

int cmd_report(const std::string& metrics_in, const std::string& format) {
  std::ifstream in(metrics_in);
  if (!in) throw Error("cannot open metrics: " + metrics_in);
  std::ostringstream ss;
  ss << in.rdbuf();
  MetricsReport report = MetricsReport::from_json(ss.str());
  if (format == "human") {
    std::cout << report.human();
  } else if (format == "csv") {
    std::cout << report.csv();
  } else if (format == "json-lines") {
    std::cout << report.json_lines();
  } else {
    std::cerr << "unknown format '" << format << "'\n";
    return 2;
  }
  return 0;
}

int cmd_fsck(const std::string& image, const std::string& config_path) {
  HarnessConfig cfg = load_config(config_path);
  auto fs = LfsCore::mount(image, cfg.fs);
  ConsistencyReport rep = fs->fsck();
  if (rep.clean()) {
    std::cout << "fsck: clean (" << fs->list_files().size() << " files)\n";
    return 0;
  }
  for (const auto& v : rep.violations) std::cout << "fsck: " << v << '\n';
  std::cout << rep.violations.size() << " violation(s)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deltafs: log-structured file system simulator with "
               "metadata-hosted delta compression"};
  app.require_subcommand(1);

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic trace");
  std::string preset, gen_out = "out.trace";
  TraceGenConfig gen_cfg;
  gen->add_option("--preset", preset, "application profile (telegram, gmail, ...)");
  gen->add_option("--seed", gen_cfg.seed, "RNG seed (env DELTAFS_SEED overrides)");
  gen->add_option("--files", gen_cfg.files, "file count");
  gen->add_option("--ops", gen_cfg.ops, "operation count after the create phase");
  gen->add_option("--min-pages", gen_cfg.min_pages, "minimum initial file pages");
  gen->add_option("--max-pages", gen_cfg.max_pages, "maximum initial file pages");
  gen->add_option("--ur", gen_cfg.update_ratio, "update ratio among writes");
  gen->add_option("--ud", gen_cfg.update_difference, "changed-byte fraction per update");
  gen->add_option("--write-ratio", gen_cfg.write_ratio, "write fraction of operations");
  gen->add_option("--fsync-every", gen_cfg.fsync_every, "ops between fsync records");
  gen->add_option("--idle-every", gen_cfg.idle_every, "ops between idle records");
  gen->add_option("-o,--output", gen_out, "trace file to write");

  // replay
  auto* rep = app.add_subcommand("replay", "replay a trace");
  std::string trace_path, config_path, image_path, metrics_out = "metrics.json", csv_out;
  bool no_compress = false, no_baseline = false;
  rep->add_option("trace", trace_path, "trace file")->required();
  rep->add_option("--config", config_path, "key=value config file");
  rep->add_option("--image", image_path, "save the device image here afterwards");
  rep->add_option("-o,--metrics", metrics_out, "metrics JSON output");
  rep->add_option("--csv", csv_out, "per-1000-tick CSV output");
  rep->add_flag("--no-compress", no_compress, "disable delta compression");
  rep->add_flag("--no-baseline", no_baseline, "skip the paired no-compression replay");

  // report
  auto* rpt = app.add_subcommand("report", "re-emit saved metrics");
  std::string metrics_in = "metrics.json", format = "human";
  rpt->add_option("-i,--metrics", metrics_in, "metrics JSON input");
  rpt->add_option("--format", format, "human | csv | json-lines");

  // fsck
  auto* fsck = app.add_subcommand("fsck", "check a device image");
  std::string fsck_image, fsck_config;
  fsck->add_option("--image", fsck_image, "device image")->required();
  fsck->add_option("--config", fsck_config, "key=value config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_trace(preset, gen_cfg, gen_out);
    if (rep->parsed()) {
      return cmd_replay(trace_path, config_path, image_path, metrics_out, csv_out, no_compress,
                        no_baseline);
    }
    if (rpt->parsed()) return cmd_report(metrics_in, format);
    if (fsck->parsed()) return cmd_fsck(fsck_image, fsck_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
