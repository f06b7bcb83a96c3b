#include "deltafs/hotness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deltafs/errors.hpp"

namespace deltafs {

const char* hotness_name(HotnessClass c) {
  switch (c) {
    case HotnessClass::ReadColdWriteCold: return "read-cold-write-cold";
    case HotnessClass::ReadColdWriteHot: return "read-cold-write-hot";
    case HotnessClass::ReadHotWriteCold: return "read-hot-write-cold";
    case HotnessClass::ReadHotWriteHot: return "read-hot-write-hot";
  }
  return "?";
}

namespace {

double dist2(const std::array<double, 2>& c, double r, double w) {
  double dr = c[0] - r, dw = c[1] - w;
  return dr * dr + dw * dw;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int nearest_centroid(const ClusterState& st, double r, double w) {
  int best = 0;
  double best_d = dist2(st.centroids[0], r, w);
  for (int c = 1; c < ClusterState::kClusters; ++c) {
    double d = dist2(st.centroids[c], r, w);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

void label_centroids(ClusterState& st, double mean_r, double mean_w) {
  for (int c = 0; c < ClusterState::kClusters; ++c) {
    bool read_hot = st.centroids[c][0] >= mean_r;
    bool write_hot = st.centroids[c][1] >= mean_w;
    st.labels[c] = static_cast<HotnessClass>((read_hot ? 2 : 0) | (write_hot ? 1 : 0));
  }
}

}  // namespace

ClusterState kmeans_cluster(const std::vector<FilePoint>& files, std::uint64_t seed) {
  if (files.empty()) throw EmptyInput("kmeans over empty point set");
  std::mt19937_64 rng(seed);
  const std::size_t n = files.size();
  ClusterState st;

  // kmeans++ seeding.
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, n);
  st.centroids[0] = {files[first].reads, files[first].writes};
  for (int c = 1; c < ClusterState::kClusters; ++c) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = dist2(st.centroids[c - 1], files[i].reads, files[i].writes);
      min_d[i] = std::min(min_d[i], d);
      total += min_d[i];
    }
    std::size_t pick;
    if (total <= 0) {
      // All points coincide with chosen centroids; fall back to uniform.
      pick = uniform_index(rng, n);
    } else {
      double u = unit_double(rng) * total;
      double acc = 0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_d[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    st.centroids[c] = {files[pick].reads, files[pick].writes};
  }

  // Lloyd iterations until assignments are stable.
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int c = nearest_centroid(st, files[i].reads, files[i].writes);
      if (c != assign[i]) {
        assign[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::array<std::array<double, 2>, ClusterState::kClusters> sums{};
    std::array<std::size_t, ClusterState::kClusters> counts{};
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]][0] += files[i].reads;
      sums[assign[i]][1] += files[i].writes;
      ++counts[assign[i]];
    }
    for (int c = 0; c < ClusterState::kClusters; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its seed point
      st.centroids[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c]};
    }
  }

  double mean_r = 0, mean_w = 0;
  for (const auto& f : files) {
    mean_r += f.reads;
    mean_w += f.writes;
  }
  mean_r /= static_cast<double>(n);
  mean_w /= static_cast<double>(n);
  label_centroids(st, mean_r, mean_w);

  for (std::size_t i = 0; i < n; ++i) st.assignment[files[i].ino] = assign[i];
  return st;
}

void HotnessTracker::record_access(InodeNum ino, AccessOp op, std::uint64_t tick) {
  auto& q = events_[ino];
  q.emplace_back(tick, op);
  prune(ino, tick);
}

void HotnessTracker::prune(InodeNum ino, std::uint64_t now) const {
  auto it = events_.find(ino);
  if (it == events_.end()) return;
  auto& q = it->second;
  while (!q.empty() && now >= window_ && q.front().first <= now - window_) q.pop_front();
}

std::pair<std::uint64_t, std::uint64_t> HotnessTracker::window_counts(
    InodeNum ino, std::uint64_t now) const {
  prune(ino, now);
  auto it = events_.find(ino);
  std::uint64_t reads = 0, writes = 0;
  if (it != events_.end()) {
    for (const auto& [tick, op] : it->second) {
      if (now >= window_ && tick <= now - window_) continue;
      (op == AccessOp::Read ? reads : writes)++;
    }
  }
  return {reads, writes};
}

std::vector<FilePoint> HotnessTracker::tracked_points(std::uint64_t now) const {
  std::vector<FilePoint> pts;
  pts.reserve(events_.size());
  for (const auto& [ino, q] : events_) {
    auto [r, w] = window_counts(ino, now);
    pts.push_back(FilePoint{ino, static_cast<double>(r), static_cast<double>(w)});
  }
  return pts;
}

void HotnessTracker::rebuild(std::uint64_t now, InodeNum include_ino) {
  std::vector<FilePoint> pts = tracked_points(now);
  bool present = false;
  for (const auto& p : pts) present = present || p.ino == include_ino;
  if (!present) {
    auto [r, w] = window_counts(include_ino, now);
    pts.push_back(FilePoint{include_ino, static_cast<double>(r), static_cast<double>(w)});
  }
  state_ = kmeans_cluster(pts, rng_());
  state_.built_at_tick = now;
  has_state_ = true;
}

HotnessClass HotnessTracker::classify(InodeNum ino, std::uint64_t now) {
  if (!has_state_ || now - state_.built_at_tick > window_ / 2) rebuild(now, ino);
  auto [r, w] = window_counts(ino, now);
  int c = nearest_centroid(state_, static_cast<double>(r), static_cast<double>(w));
  return state_.labels[c];
}

void HotnessTracker::update_centroids(std::uint64_t now) {
  if (!has_state_) return;
  std::array<std::array<double, 2>, ClusterState::kClusters> sums{};
  std::array<std::size_t, ClusterState::kClusters> counts{};
  double mean_r = 0, mean_w = 0;
  std::size_t n = 0;
  for (const auto& [ino, c] : state_.assignment) {
    auto [r, w] = window_counts(ino, now);
    sums[c][0] += static_cast<double>(r);
    sums[c][1] += static_cast<double>(w);
    ++counts[c];
    mean_r += static_cast<double>(r);
    mean_w += static_cast<double>(w);
    ++n;
  }
  for (int c = 0; c < ClusterState::kClusters; ++c) {
    if (counts[c] == 0) continue;
    state_.centroids[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c]};
  }
  if (n > 0) label_centroids(state_, mean_r / n, mean_w / n);
}

void HotnessTracker::reset() {
  events_.clear();
  has_state_ = false;
  state_ = ClusterState{};
}

}  // namespace deltafs
