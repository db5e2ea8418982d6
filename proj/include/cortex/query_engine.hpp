#pragma once
// Range query execution: the hybrid scan + lookup plan over a CortexIndex and
// three baselines (full scan, secondary index, Correlation Map).
//
// Results are the clustered keys of matching records, sorted ascending.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cortex/column_store.hpp"
#include "cortex/correlation.hpp"
#include "cortex/index.hpp"

namespace cortex {

struct RangeQuery {
  std::string column;
  ValueRange range;
};

struct ExecutionStats {
  std::size_t range_records_touched = 0;
  std::size_t point_lookups = 0;
  std::size_t result_size = 0;
  std::size_t dedup_removed = 0;
  std::uint64_t elapsed_ns = 0;
};

struct QueryResult {
  std::vector<ClusteredKey> ids;
  ExecutionStats stats;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  std::uint64_t elapsed_ns() const {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count());
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Key ranges of the given host buckets (sorted ids), with adjacent ranges joined.
inline std::vector<KeyRange> merged_key_ranges(const std::vector<HostBucketId>& hosts) {
  std::vector<KeyRange> out;
  for (auto h : hosts) {
    auto r = key_range_of(h);
    if (!out.empty() && out.back().hi >= r.lo) out.back().hi = std::max(out.back().hi, r.hi);
    else out.push_back(r);
  }
  return out;
}

/// Removes keys covered by any range. Both inputs sorted; one linear sweep.
inline std::size_t drop_covered(std::vector<ClusteredKey>& keys, const std::vector<KeyRange>& ranges) {
  std::size_t w = 0;
  std::size_t j = 0;
  for (auto k : keys) {
    while (j < ranges.size() && ranges[j].hi <= k) ++j;
    if (j < ranges.size() && ranges[j].contains(k)) continue;
    keys[w++] = k;
  }
  auto removed = keys.size() - w;
  keys.resize(w);
  return removed;
}

}  // namespace detail

inline void validate_query(const RangeQuery& q) {
  if (q.range.lo > q.range.hi) throw Error("query range must satisfy lo <= hi");
}

/// Inlier lookup, outlier lookup, dedup, then scan + point lookups.
inline QueryResult execute(const CortexIndex& index, const RangeQuery& q) {
  validate_query(q);
  const auto& c = index.correlation(q.column);
  detail::Stopwatch sw;
  QueryResult res;
  if (q.range.empty()) return res;
  const auto& table = index.table();
  const auto values = table.column(c.column_index);
  const auto r = q.range;

  auto ranges = detail::merged_key_ranges(inlier_hosts(c.assignment, c.buckets, r));
  auto keys = outlier_keys(c.assignment, c.buckets, r);
  res.stats.dedup_removed = detail::drop_covered(keys, ranges);

  for (const auto& kr : ranges) {
    auto [first, last] = table.rows_in(kr);
    res.stats.range_records_touched += scan_rows(
        first, last, [&](RowId row) { return r.contains(values[row]); },
        [&](RowId row) { res.ids.push_back(table.key(row)); });
  }
  const auto scanned = res.ids.size();
  for (auto k : keys) {
    auto row = table.find(k);
    ++res.stats.point_lookups;
    if (row && r.contains(values[*row])) res.ids.push_back(k);
  }
  std::inplace_merge(res.ids.begin(), res.ids.begin() + static_cast<std::ptrdiff_t>(scanned), res.ids.end());
  res.stats.result_size = res.ids.size();
  res.stats.elapsed_ns = sw.elapsed_ns();
  return res;
}

inline QueryResult full_scan(const Table& table, const RangeQuery& q) {
  validate_query(q);
  detail::Stopwatch sw;
  QueryResult res;
  const auto values = table.column(table.column_index(q.column));
  res.stats.range_records_touched =
      scan_rows(0, table.row_count(), [&](RowId row) { return q.range.contains(values[row]); },
                [&](RowId row) { res.ids.push_back(table.key(row)); });
  res.stats.result_size = res.ids.size();
  res.stats.elapsed_ns = sw.elapsed_ns();
  return res;
}

/// Sorted (value, key) pairs for one column.
class SecondaryIndex {
 public:
  static SecondaryIndex build(const Table& table, const std::string& column) {
    SecondaryIndex s;
    s.column_ = column;
    const auto values = table.column(table.column_index(column));
    s.entries_.reserve(table.row_count());
    for (RowId r = 0; r < table.row_count(); ++r) s.entries_.push_back({values[r], table.key(r)});
    std::sort(s.entries_.begin(), s.entries_.end());
    return s;
  }

  const std::string& column() const { return column_; }
  std::span<const StashEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t bytes() const { return entries_.size() * IndexSizes::kStashEntryBytes; }

 private:
  std::string column_;
  std::vector<StashEntry> entries_;
};

inline QueryResult secondary_execute(const SecondaryIndex& sec, const Table& table, const RangeQuery& q) {
  validate_query(q);
  if (q.column != sec.column()) throw Error("secondary index is on '" + sec.column() + "', not '" + q.column + "'");
  detail::Stopwatch sw;
  QueryResult res;
  if (q.range.empty()) return res;
  const auto values = table.column(table.column_index(q.column));
  auto e = sec.entries();
  auto it = std::lower_bound(e.begin(), e.end(), StashEntry{q.range.lo, 0});
  for (; it != e.end() && it->value < q.range.hi; ++it) {
    auto row = table.find(it->key);
    ++res.stats.point_lookups;
    if (row && q.range.contains(values[*row])) res.ids.push_back(it->key);
  }
  std::sort(res.ids.begin(), res.ids.end());
  res.stats.result_size = res.ids.size();
  res.stats.elapsed_ns = sw.elapsed_ns();
  return res;
}

/// Every host bucket holding at least one record of target bucket t.
class CorrelationMapBaseline {
 public:
  static CorrelationMapBaseline from_index(const CortexIndex& index, const std::string& column) {
    const auto& c = index.correlation(column);
    CorrelationMapBaseline cm;
    cm.column_ = column;
    cm.column_index_ = c.column_index;
    cm.buckets_ = c.buckets;
    for (const auto& row : c.assignment.cells) {
      std::vector<HostBucketId> hosts;
      for (const auto& [h, cell] : row) hosts.push_back(h);
      cm.map_.push_back(std::move(hosts));
    }
    return cm;
  }

  const std::string& column() const { return column_; }
  std::size_t column_index() const { return column_index_; }
  const TargetBuckets& buckets() const { return buckets_; }
  const std::vector<HostBucketId>& hosts(TargetBucketId t) const { return map_.at(t); }
  std::size_t entries() const {
    std::size_t n = 0;
    for (const auto& m : map_) n += m.size();
    return n;
  }
  std::size_t bytes() const { return entries() * IndexSizes::kHostIdBytes; }

 private:
  std::string column_;
  std::size_t column_index_ = 0;
  TargetBuckets buckets_;
  std::vector<std::vector<HostBucketId>> map_;
};

inline QueryResult cm_execute(const CorrelationMapBaseline& cm, const Table& table, const RangeQuery& q) {
  validate_query(q);
  if (q.column != cm.column()) throw Error("correlation map is on '" + cm.column() + "', not '" + q.column + "'");
  detail::Stopwatch sw;
  QueryResult res;
  auto span = cm.buckets().intersecting(q.range);
  if (!span) return res;
  std::vector<HostBucketId> hosts;
  for (auto t = span->first; t <= span->second; ++t) hosts.insert(hosts.end(), cm.hosts(t).begin(), cm.hosts(t).end());
  std::sort(hosts.begin(), hosts.end());
  hosts.erase(std::unique(hosts.begin(), hosts.end()), hosts.end());
  const auto values = table.column(cm.column_index());
  for (const auto& kr : detail::merged_key_ranges(hosts)) {
    auto [first, last] = table.rows_in(kr);
    res.stats.range_records_touched += scan_rows(
        first, last, [&](RowId row) { return q.range.contains(values[row]); },
        [&](RowId row) { res.ids.push_back(table.key(row)); });
  }
  res.stats.result_size = res.ids.size();
  res.stats.elapsed_ns = sw.elapsed_ns();
  return res;
}

}  // namespace cortex
