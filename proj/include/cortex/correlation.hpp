#pragma once
// Target bucketing, the (target bucket x host bucket) cell grid, and the
// inlier map / outlier stash that together index one correlated column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cortex/column_store.hpp"
#include "cortex/common.hpp"
#include "cortex/host_index.hpp"

namespace cortex {

struct TargetBucket {
  TargetBucketId id = 0;
  ValueRange value_range;
};

/// Sorted, disjoint value ranges over the target column. Bucket t covers
/// [lower_edges[t], lower_edges[t+1]); the last one ends at upper(). Lookups
/// clamp values beyond either end into the extreme buckets.
class TargetBuckets {
 public:
  TargetBuckets() = default;

  static TargetBuckets from_edges(std::vector<std::int64_t> lower_edges, std::int64_t upper) {
    if (lower_edges.empty()) throw Error("target buckets need at least one edge");
    for (std::size_t i = 1; i < lower_edges.size(); ++i)
      if (lower_edges[i - 1] >= lower_edges[i]) throw Error("target bucket edges must be strictly increasing");
    if (upper <= lower_edges.back()) throw Error("target bucket upper bound must exceed the last edge");
    TargetBuckets b;
    b.edges_ = std::move(lower_edges);
    b.upper_ = upper;
    return b;
  }

  std::size_t size() const { return edges_.size(); }
  std::span<const std::int64_t> lower_edges() const { return edges_; }
  std::int64_t upper() const { return upper_; }

  TargetBucket bucket(TargetBucketId t) const {
    return {t, {edges_.at(t), t + 1 < edges_.size() ? edges_[t + 1] : upper_}};
  }

  std::vector<TargetBucket> buckets() const {
    std::vector<TargetBucket> out;
    for (TargetBucketId t = 0; t < size(); ++t) out.push_back(bucket(t));
    return out;
  }

  TargetBucketId locate(std::int64_t v) const {
    auto it = std::upper_bound(edges_.begin(), edges_.end(), v);
    if (it == edges_.begin()) return 0;
    return static_cast<TargetBucketId>(it - edges_.begin() - 1);
  }

  /// Inclusive id span of buckets whose (clamped) ranges meet R.
  std::optional<std::pair<TargetBucketId, TargetBucketId>> intersecting(ValueRange r) const {
    if (r.empty() || edges_.empty()) return std::nullopt;
    return std::make_pair(locate(r.lo), locate(r.hi - 1));
  }

  /// True when bucket t's whole value range lies inside R.
  bool covered_by(TargetBucketId t, ValueRange r) const {
    auto b = bucket(t).value_range;
    return r.lo <= b.lo && b.hi <= r.hi;
  }

  /// Widens the extreme buckets so their nominal ranges include v.
  void extend_to(std::int64_t v) {
    if (v < edges_.front()) edges_.front() = v;
    if (v >= upper_) upper_ = v == kMaxValue ? kMaxValue : v + 1;
  }

  /// Inserts a new edge inside bucket t; bucket ids above t shift by one.
  void split(TargetBucketId t, std::int64_t at) {
    auto b = bucket(t);
    if (!(b.value_range.lo < at && at < b.value_range.hi)) throw Error("split point outside bucket");
    edges_.insert(edges_.begin() + t + 1, at);
  }

 private:
  std::vector<std::int64_t> edges_;
  std::int64_t upper_ = 0;
};

/// Equi-depth bucketing of a target column. Columns with at most n_buckets
/// distinct values get one bucket per value.
inline TargetBuckets build_target_buckets(std::span<const std::int64_t> values, std::size_t n_buckets) {
  if (n_buckets < 1) throw Error("target bucket count must be >= 1");
  if (values.empty()) throw Error("cannot bucket an empty target column");
  std::vector<std::int64_t> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::int64_t upper = sorted.back() == kMaxValue ? kMaxValue : sorted.back() + 1;

  std::vector<std::int64_t> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= n_buckets) return TargetBuckets::from_edges(std::move(distinct), upper);

  std::vector<std::int64_t> edges{sorted.front()};
  const std::size_t n = sorted.size();
  for (std::size_t k = 1; k < n_buckets; ++k) {
    auto edge = sorted[k * n / n_buckets];
    if (edge > edges.back()) edges.push_back(edge);
  }
  return TargetBuckets::from_edges(std::move(edges), upper);
}

/// Bucket count covering the narrowest query of a workload: ceil(1 / s_L).
inline std::size_t target_buckets_for(double lowest_selectivity) {
  if (!(lowest_selectivity > 0)) throw Error("selectivity must be positive");
  auto n = static_cast<std::size_t>(std::ceil(1.0 / lowest_selectivity - 1e-9));
  return std::max<std::size_t>(1, n);
}

// ---------------------------------------------------------------------------
// Cell grid

enum class CellClass : std::uint8_t { inlier = 0, outlier = 1 };
using Classification = std::vector<CellClass>;

struct Cell {
  TargetBucketId target = 0;
  HostBucketId host = 0;
  std::size_t count = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Non-empty cells with their counts, plus the size of every host bucket.
struct CellGrid {
  /// Sorted by (target, host); every count >= 1.
  std::vector<Cell> cells;
  /// |h| indexed by host bucket id.
  std::vector<std::size_t> host_sizes;
  std::size_t target_count = 0;

  std::size_t host_size(HostBucketId h) const { return h < host_sizes.size() ? host_sizes[h] : 0; }

  std::size_t records() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.count;
    return n;
  }

  /// Sorts cells and fills target_count from the data when unset.
  void normalize() {
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
      return std::pair(a.target, a.host) < std::pair(b.target, b.host);
    });
    for (const auto& c : cells) target_count = std::max<std::size_t>(target_count, c.target + 1);
  }
};

inline CellGrid build_cell_grid(const Table& table, const HostIndex& host, std::size_t target_column,
                                const TargetBuckets& buckets) {
  CellGrid grid;
  grid.target_count = buckets.size();
  grid.host_sizes.assign(host.id_limit(), 0);
  for (auto id : host.live_ids()) grid.host_sizes[id] = host.count(id);
  const auto values = table.column(target_column);
  // Rows are grouped by host bucket, so one pass with a small per-bucket map suffices.
  std::map<TargetBucketId, std::size_t> run;
  HostBucketId current = 0;
  auto flush = [&] {
    for (const auto& [t, n] : run) grid.cells.push_back({t, current, n});
    run.clear();
  };
  for (RowId r = 0; r < table.row_count(); ++r) {
    auto h = bucket_of(table.key(r));
    if (h != current) {
      flush();
      current = h;
    }
    ++run[buckets.locate(values[r])];
  }
  flush();
  grid.normalize();
  return grid;
}

// ---------------------------------------------------------------------------
// Outlier assignment

struct StashEntry {
  std::int64_t value = 0;
  ClusteredKey key = 0;

  friend auto operator<=>(const StashEntry&, const StashEntry&) = default;
};

struct CellState {
  std::size_t count = 0;
  CellClass cls = CellClass::inlier;
};

/// The partition of cells into inliers and outliers together with the two
/// query structures it induces.
struct OutlierAssignment {
  /// Per target bucket: host bucket -> cell count and class.
  std::vector<std::map<HostBucketId, CellState>> cells;
  /// Per target bucket: sorted host ids of inlier cells.
  std::vector<std::vector<HostBucketId>> inlier_map;
  /// Per target bucket: outlier rows sorted by (value, key).
  std::vector<std::vector<StashEntry>> stash;

  std::size_t stash_size() const {
    std::size_t n = 0;
    for (const auto& s : stash) n += s.size();
    return n;
  }

  std::size_t inlier_map_entries() const {
    std::size_t n = 0;
    for (const auto& m : inlier_map) n += m.size();
    return n;
  }

  /// Space overhead implied by the cell classes: sum of outlier cell counts.
  std::size_t outlier_records() const {
    std::size_t n = 0;
    for (const auto& row : cells)
      for (const auto& [h, c] : row)
        if (c.cls == CellClass::outlier) n += c.count;
    return n;
  }

  std::size_t outlier_cells() const {
    std::size_t n = 0;
    for (const auto& row : cells)
      for (const auto& [h, c] : row) n += c.cls == CellClass::outlier;
    return n;
  }

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& row : cells) n += row.size();
    return n;
  }
};

/// Builds the inlier map and stash for a classification of grid.cells.
inline OutlierAssignment materialize_assignment(const Table& table, std::size_t target_column,
                                                const TargetBuckets& buckets, const CellGrid& grid,
                                                const Classification& cls) {
  if (cls.size() != grid.cells.size()) throw Error("classification does not cover every cell");
  OutlierAssignment a;
  a.cells.resize(buckets.size());
  a.inlier_map.resize(buckets.size());
  a.stash.resize(buckets.size());
  std::map<HostBucketId, std::vector<TargetBucketId>> outlier_hosts;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const auto& c = grid.cells[i];
    a.cells.at(c.target)[c.host] = {c.count, cls[i]};
    if (cls[i] == CellClass::inlier) a.inlier_map[c.target].push_back(c.host);
    else outlier_hosts[c.host].push_back(c.target);
  }
  for (auto& m : a.inlier_map) std::sort(m.begin(), m.end());

  const auto values = table.column(target_column);
  for (const auto& [h, targets] : outlier_hosts) {
    auto [first, last] = table.rows_in(key_range_of(h));
    for (RowId r = first; r < last; ++r) {
      auto t = buckets.locate(values[r]);
      if (std::find(targets.begin(), targets.end(), t) != targets.end())
        a.stash[t].push_back({values[r], table.key(r)});
    }
  }
  for (auto& s : a.stash) std::sort(s.begin(), s.end());
  return a;
}

/// Host buckets to range-scan for R: the union of inlier_map[t] over target
/// buckets meeting R.
inline std::vector<HostBucketId> inlier_hosts(const OutlierAssignment& a, const TargetBuckets& buckets,
                                              ValueRange r) {
  std::vector<HostBucketId> out;
  auto span = buckets.intersecting(r);
  if (!span) return out;
  for (auto t = span->first; t <= span->second; ++t)
    out.insert(out.end(), a.inlier_map[t].begin(), a.inlier_map[t].end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Stashed keys in buckets meeting R whose value lies in R, sorted.
inline std::vector<ClusteredKey> outlier_keys(const OutlierAssignment& a, const TargetBuckets& buckets,
                                              ValueRange r) {
  std::vector<ClusteredKey> out;
  auto span = buckets.intersecting(r);
  if (!span) return out;
  for (auto t = span->first; t <= span->second; ++t) {
    const auto& s = a.stash[t];
    if (buckets.covered_by(t, r)) {
      for (const auto& e : s) out.push_back(e.key);
      continue;
    }
    auto it = std::lower_bound(s.begin(), s.end(), StashEntry{r.lo, 0});
    for (; it != s.end() && it->value < r.hi; ++it) out.push_back(it->key);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cortex
