#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <vector>

#include "deltafs/types.hpp"

namespace deltafs {

enum class AccessOp : std::uint8_t { Read, Write };

enum class HotnessClass : std::uint8_t {
  ReadColdWriteCold = 0,
  ReadColdWriteHot = 1,
  ReadHotWriteCold = 2,
  ReadHotWriteHot = 3,
};

const char* hotness_name(HotnessClass c);

struct FilePoint {
  InodeNum ino = 0;
  double reads = 0;
  double writes = 0;
};

struct ClusterState {
  static constexpr int kClusters = 4;
  std::array<std::array<double, 2>, kClusters> centroids{};  // (reads, writes)
  std::array<HotnessClass, kClusters> labels{};
  std::map<InodeNum, int> assignment;
  std::uint64_t built_at_tick = 0;
};

// kmeans++ over (read_count, write_count) points: first centroid uniform by
// the seeded RNG, each next sampled proportionally to squared distance to
// the nearest chosen one, then Lloyd iterations until assignments are
// stable (at most 100). Centroids are labeled against the global means:
// read-hot iff centroid_read >= mean_read, write-hot likewise. Draw
// protocol: uniform index = rng() % n; weighted pick scans the cumulative
// weights against (rng() >> 11) * 2^-53 * total. Throws EmptyInput on an
// empty point set.
ClusterState kmeans_cluster(const std::vector<FilePoint>& files, std::uint64_t seed);

// Windowed per-file read/write counting feeding the clustering. Events
// older than the window are pruned lazily; a count at tick `now` covers
// events with tick > now - T.
class HotnessTracker {
 public:
  explicit HotnessTracker(std::uint64_t window_ticks = 60000, std::uint64_t seed = 0x5eed)
      : window_(window_ticks), rng_(seed) {}

  void record_access(InodeNum ino, AccessOp op, std::uint64_t tick);

  std::pair<std::uint64_t, std::uint64_t> window_counts(InodeNum ino, std::uint64_t now) const;

  // Nearest-centroid class of the file's current window counts (ties go to
  // the lowest cluster id). Reclusters over all tracked files when no state
  // exists or the state is older than T/2.
  HotnessClass classify(InodeNum ino, std::uint64_t now);

  // Online refresh: recomputes each centroid as the mean of its assigned
  // files' current window counts (empty clusters keep their centroid) and
  // relabels against the new global means.
  void update_centroids(std::uint64_t now);

  const ClusterState* state() const { return has_state_ ? &state_ : nullptr; }
  std::uint64_t window() const { return window_; }
  void forget(InodeNum ino) { events_.erase(ino); }
  void reset();

  std::vector<FilePoint> tracked_points(std::uint64_t now) const;

 private:
  void prune(InodeNum ino, std::uint64_t now) const;
  void rebuild(std::uint64_t now, InodeNum include_ino);

  std::uint64_t window_;
  std::mt19937_64 rng_;
  mutable std::map<InodeNum, std::deque<std::pair<std::uint64_t, AccessOp>>> events_;
  ClusterState state_;
  bool has_state_ = false;
};

}  // namespace deltafs
