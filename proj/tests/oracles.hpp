#pragma once
// Reference implementations used only by tests. Each one recomputes a result
// the slow, obvious way so the library can be checked against it.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cortex/column_store.hpp"
#include "cortex/correlation.hpp"
#include "cortex/host_index.hpp"
#include "cortex/index.hpp"
#include "cortex/stashing.hpp"

namespace oracle {

using namespace cortex;

/// Keys of rows whose value in `column` lies in R, by linear filter.
inline std::vector<ClusteredKey> filter_keys(const Table& t, std::size_t column, ValueRange r) {
  std::vector<ClusteredKey> out;
  for (RowId i = 0; i < t.row_count(); ++i) {
    auto v = t.value(column, i);
    if (v >= r.lo && v < r.hi) out.push_back(t.key(i));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Target bucket by scanning the bucket list, clamping at both ends.
inline TargetBucketId target_of(const TargetBuckets& b, std::int64_t v) {
  TargetBucketId found = 0;
  for (const auto& tb : b.buckets())
    if (v >= tb.value_range.lo) found = tb.id;
  return found;
}

using CellCounts = std::map<std::pair<TargetBucketId, HostBucketId>, std::size_t>;

inline CellCounts count_cells(const Table& t, std::size_t column, const TargetBuckets& b) {
  CellCounts out;
  for (RowId i = 0; i < t.row_count(); ++i) ++out[{target_of(b, t.value(column, i)), bucket_of(t.key(i))}];
  return out;
}

/// Cost evaluated straight from its definition: every inlier cell charges its
/// host bucket size, every outlier record the per-record stash price.
inline long double cost_by_definition(const CellGrid& g, const Classification& cls, long double alpha,
                                      long double beta) {
  long double p0 = 0;
  long double n = 0;
  for (const auto& c : g.cells) {
    p0 += g.host_sizes.at(c.host);
    n += c.count;
  }
  const long double price = n > 0 ? beta + alpha * (p0 / n) : beta;
  long double cost = 0;
  for (std::size_t i = 0; i < g.cells.size(); ++i)
    cost += cls[i] == CellClass::inlier ? static_cast<long double>(g.host_sizes.at(g.cells[i].host))
                                        : price * static_cast<long double>(g.cells[i].count);
  return cost;
}

/// Minimum of assignment_cost over all 2^k classifications.
inline double exhaustive_min_cost(const CellGrid& g, const CostParams& p) {
  const std::size_t k = g.cells.size();
  double best = std::numeric_limits<double>::infinity();
  Classification cls(k);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    for (std::size_t i = 0; i < k; ++i) cls[i] = (mask >> i) & 1 ? CellClass::outlier : CellClass::inlier;
    best = std::min(best, assignment_cost(g, cls, p));
  }
  return best;
}

/// A random grid with at most max_cells cells over a handful of buckets.
/// Host sizes are at least the sum of their cells so every grid is feasible.
inline CellGrid random_grid(std::mt19937_64& rng, std::size_t max_cells) {
  std::uniform_int_distribution<std::size_t> ncell(1, max_cells);
  std::uniform_int_distribution<std::uint32_t> tb(0, 4);
  std::uniform_int_distribution<std::uint32_t> hb(0, 5);
  std::uniform_int_distribution<std::size_t> cnt(1, 60);
  std::set<std::pair<std::uint32_t, std::uint32_t>> used;
  CellGrid g;
  const auto want = ncell(rng);
  while (g.cells.size() < want) {
    auto t = tb(rng), h = hb(rng);
    if (!used.insert({t, h}).second) continue;
    g.cells.push_back({t, h, cnt(rng)});
  }
  g.host_sizes.assign(6, 0);
  for (const auto& c : g.cells) g.host_sizes[c.host] += c.count;
  g.normalize();
  return g;
}

/// Buckets whose effective region contains the point, by checking every one.
inline std::vector<HostBucketId> containing_buckets(const HostIndex& host, std::span<const std::int64_t> p) {
  std::vector<HostBucketId> out;
  for (auto id : host.live_ids()) {
    auto reg = host.region(id);
    bool in = true;
    for (std::size_t d = 0; d < reg.size(); ++d) in &= reg[d].contains(p[d]);
    if (in) out.push_back(id);
  }
  return out;
}

inline std::vector<HostBucketId> intersecting_buckets(const HostIndex& host, const std::vector<ValueRange>& box) {
  std::vector<HostBucketId> out;
  for (auto id : host.live_ids()) {
    auto reg = host.region(id);
    bool hit = true;
    for (std::size_t d = 0; d < reg.size(); ++d) hit &= reg[d].lo < box[d].hi && box[d].lo < reg[d].hi;
    if (hit) out.push_back(id);
  }
  return out;
}

/// Classes a cold build over the index's current table, host partition and
/// bucket edges would assign, keyed by cell.
inline std::map<std::pair<TargetBucketId, HostBucketId>, CellClass> cold_classes(const CortexIndex& idx,
                                                                                   const std::string& column) {
  const auto& c = idx.correlation(column);
  auto counts = count_cells(idx.table(), c.column_index, c.buckets);
  std::map<HostBucketId, std::size_t> host_size;
  for (RowId i = 0; i < idx.table().row_count(); ++i) ++host_size[bucket_of(idx.table().key(i))];
  std::uint64_t p0 = 0;
  for (const auto& [cell, n] : counts) p0 += host_size[cell.second];
  const double n = static_cast<double>(idx.table().row_count());
  const double thr = idx.policy().beta + idx.policy().alpha * (static_cast<double>(p0) / n);
  std::map<std::pair<TargetBucketId, HostBucketId>, CellClass> out;
  for (const auto& [cell, n] : counts)
    out[cell] = is_outlier_cell(n, host_size[cell.second], thr) ? CellClass::outlier : CellClass::inlier;
  return out;
}

inline std::map<std::pair<TargetBucketId, HostBucketId>, CellClass> current_classes(const CortexIndex& idx,
                                                                                      const std::string& column) {
  const auto& c = idx.correlation(column);
  std::map<std::pair<TargetBucketId, HostBucketId>, CellClass> out;
  for (TargetBucketId t = 0; t < c.assignment.cells.size(); ++t)
    for (const auto& [h, cell] : c.assignment.cells[t]) out[{t, h}] = cell.cls;
  return out;
}

}  // namespace oracle
