#pragma once
// Incremental maintenance of cell counts, P0, classifications, the inlier map
// and the stash under insert and delete batches.
//
// Per batch the tracker
//   1. lets the host index key (or remove) the records and restructure buckets,
//   2. drops every cell of a retired host bucket and recounts its successors
//      from the table,
//   3. applies the remaining per-row count changes (rows landing in an
//      unchanged outlier cell go straight to the stash),
//   4. updates P0 exactly from the before/after contribution of every touched
//      host bucket, and
//   5. re-tests every cell of every touched host bucket against the new
//      threshold. An outlier -> inlier flip drops the cell's stash entries; an
//      inlier -> outlier flip scans the host bucket to collect them.
// Cells in untouched host buckets are not re-tested; revalidate() repairs the
// resulting drift.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cortex/index.hpp"

namespace cortex {

struct ChangeReport {
  std::size_t inserted = 0;
  std::size_t deleted = 0;
  std::size_t stash_additions = 0;
  std::size_t stash_removals = 0;
  std::size_t cells_created = 0;
  std::size_t cells_removed = 0;
  std::size_t cells_flipped_to_inlier = 0;
  std::size_t cells_flipped_to_outlier = 0;
  std::size_t target_splits = 0;
  std::size_t host_splits = 0;
  std::size_t host_merges = 0;
  /// Inserted records whose host values fell outside the indexed domain.
  std::size_t clamped = 0;
  /// Final clustered keys of inserted records, in input order.
  std::vector<ClusteredKey> keys;
  std::vector<std::string> notices;

  ChangeReport& operator+=(const ChangeReport& o) {
    inserted += o.inserted;
    deleted += o.deleted;
    stash_additions += o.stash_additions;
    stash_removals += o.stash_removals;
    cells_created += o.cells_created;
    cells_removed += o.cells_removed;
    cells_flipped_to_inlier += o.cells_flipped_to_inlier;
    cells_flipped_to_outlier += o.cells_flipped_to_outlier;
    target_splits += o.target_splits;
    host_splits += o.host_splits;
    host_merges += o.host_merges;
    clamped += o.clamped;
    keys.insert(keys.end(), o.keys.begin(), o.keys.end());
    notices.insert(notices.end(), o.notices.begin(), o.notices.end());
    return *this;
  }
};

class UpdateTracker {
 public:
  static constexpr double kDefaultCrowdingRatio = 4.0;

  explicit UpdateTracker(CortexIndex& index) : idx_(index) {}

  /// Inserts encoded records (one value per table column, keys assigned here).
  ChangeReport process_insert_batch(const std::vector<std::vector<std::int64_t>>& rows) {
    for (const auto& r : rows)
      if (r.size() != idx_.table_.column_count()) throw Error("insert: record arity does not match table");
    for (auto& c : idx_.correlations_)
      for (const auto& r : rows) c.buckets.extend_to(r[c.column_index]);
    auto outcome = idx_.host_.apply_insert(idx_.table_, rows);
    ChangeReport rep;
    rep.inserted = rows.size();
    rep.clamped = outcome.clamped;
    rep.keys = outcome.keys;
    count_events(outcome.events, rep);
    absorb(outcome.keys, {}, outcome.events, rep);
    return rep;
  }

  ChangeReport process_delete_batch(std::span<const ClusteredKey> keys) {
    auto outcome = idx_.host_.apply_delete(idx_.table_, keys);
    ChangeReport rep;
    rep.deleted = outcome.removed.size();
    count_events(outcome.events, rep);
    absorb({}, outcome.removed, outcome.events, rep);
    return rep;
  }

  /// Splits target bucket t at its median value. Returns false (with a
  /// notice) when the bucket holds a single distinct value.
  bool split_target_bucket(std::string_view column, TargetBucketId t, ChangeReport* rep = nullptr) {
    auto& c = mutable_correlation(column);
    if (t >= c.buckets.size()) throw Error("target bucket id out of range");
    auto& a = c.assignment;
    const auto values = idx_.table_.column(c.column_index);

    struct Row {
      std::int64_t value;
      ClusteredKey key;
    };
    std::vector<Row> rows;
    for (const auto& [h, cell] : a.cells[t]) {
      auto [first, last] = idx_.table_.rows_in(key_range_of(h));
      for (RowId r = first; r < last; ++r)
        if (c.buckets.locate(values[r]) == t) rows.push_back({values[r], idx_.table_.key(r)});
    }
    std::vector<std::int64_t> sorted;
    sorted.reserve(rows.size());
    for (const auto& r : rows) sorted.push_back(r.value);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || sorted.front() == sorted.back()) {
      if (rep) rep->notices.push_back("target bucket " + std::to_string(t) + " of '" + c.column +
                                      "' holds a single distinct value; not split");
      return false;
    }
    std::int64_t at = sorted[sorted.size() / 2];
    if (at == sorted.front()) at = *std::upper_bound(sorted.begin(), sorted.end(), at);
    // A value below the nominal lower edge can only occur in bucket 0 after clamping.
    auto nominal = c.buckets.bucket(t).value_range;
    if (!(nominal.lo < at && at < nominal.hi)) {
      if (rep) rep->notices.push_back("target bucket " + std::to_string(t) + " split point outside its range");
      return false;
    }

    std::vector<HostBucketId> hosts;
    for (const auto& [h, cell] : a.cells[t]) hosts.push_back(h);
    std::uint64_t old_contrib = contribution(c, hosts);

    for (auto h : hosts) {
      auto& th = c.targets_in_host[h];
      th.erase(std::lower_bound(th.begin(), th.end(), t));
    }
    c.buckets.split(t, at);
    a.cells[t].clear();
    a.inlier_map[t].clear();
    a.stash[t].clear();
    a.cells.insert(a.cells.begin() + t + 1, std::map<HostBucketId, CellState>{});
    a.inlier_map.insert(a.inlier_map.begin() + t + 1, std::vector<HostBucketId>{});
    a.stash.insert(a.stash.begin() + t + 1, std::vector<StashEntry>{});
    for (auto& th : c.targets_in_host)
      for (auto& x : th)
        if (x > t) ++x;

    for (const auto& r : rows) {
      auto nt = r.value < at ? t : t + 1;
      auto h = bucket_of(r.key);
      auto [it, fresh] = a.cells[nt].try_emplace(h, CellState{0, CellClass::inlier});
      ++it->second.count;
      if (fresh) {
        auto& th = c.targets_in_host[h];
        th.insert(std::lower_bound(th.begin(), th.end(), nt), nt);
      }
    }
    c.p0 = c.p0 - old_contrib + contribution(c, hosts);

    const double thr = idx_.threshold(c);
    for (auto nt : {t, t + 1}) {
      for (auto& [h, cell] : a.cells[nt]) {
        cell.cls = classify(cell.count, idx_.host_.count(h), thr, CellClass::inlier);
        if (cell.cls == CellClass::inlier) a.inlier_map[nt].push_back(h);
      }
    }
    for (const auto& r : rows) {
      auto nt = r.value < at ? t : t + 1;
      if (a.cells[nt].at(bucket_of(r.key)).cls == CellClass::outlier) a.stash[nt].push_back({r.value, r.key});
    }
    std::sort(a.stash[t].begin(), a.stash[t].end());
    std::sort(a.stash[t + 1].begin(), a.stash[t + 1].end());
    if (rep) ++rep->target_splits;
    return true;
  }

  /// Splits, once each, every bucket whose population exceeds ratio * N / N_t.
  std::size_t maybe_split_crowded_buckets(std::string_view column, double ratio = kDefaultCrowdingRatio,
                                          ChangeReport* rep = nullptr) {
    auto& c = mutable_correlation(column);
    const double limit = ratio * static_cast<double>(idx_.record_count()) / static_cast<double>(c.buckets.size());
    std::vector<TargetBucketId> crowded;
    for (TargetBucketId t = 0; t < c.buckets.size(); ++t) {
      std::size_t pop = 0;
      for (const auto& [h, cell] : c.assignment.cells[t]) pop += cell.count;
      if (static_cast<double>(pop) > limit) crowded.push_back(t);
    }
    std::size_t splits = 0;
    // Highest id first so pending ids are not shifted by earlier splits.
    for (auto it = crowded.rbegin(); it != crowded.rend(); ++it) splits += split_target_bucket(column, *it, rep);
    return splits;
  }

  std::size_t maybe_split_crowded_buckets(double ratio = kDefaultCrowdingRatio, ChangeReport* rep = nullptr) {
    std::size_t n = 0;
    for (const auto& c : idx_.correlations_) n += maybe_split_crowded_buckets(c.column, ratio, rep);
    return n;
  }

  /// Recomputes P0 cold, re-tests every cell and repairs stash coverage.
  /// Returns the number of cells reclassified or repaired.
  std::size_t revalidate(ChangeReport* rep = nullptr) {
    ChangeReport local;
    auto& r = rep ? *rep : local;
    std::size_t corrections = 0;
    for (auto& c : idx_.correlations_) {
      c.p0 = idx_.recompute_p0(c);
      corrections += repair_coverage(c, r);
      auto [grid, current] = idx_.grid(c);
      Classification want;
      if (idx_.policy_.max_stash) {
        want = assign_outliers_budget(grid, *idx_.policy_.max_stash, idx_.policy_.beta, idx_.policy_.bucket_weights);
      } else {
        want = assign_outliers_alpha(grid, idx_.policy_.alpha, idx_.policy_.beta);
      }
      Flips flips(c.buckets.size());
      for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        if (want[i] == current[i]) continue;
        ++corrections;
        flip(c, grid.cells[i].target, grid.cells[i].host, want[i], flips, r);
      }
      apply_flips(c, flips, r);
    }
    return corrections;
  }

  /// Test hook: overwrites the running P0 of a correlation.
  void inject_stale_p0(std::string_view column, std::uint64_t p0) { mutable_correlation(column).p0 = p0; }

 private:
  /// Pending stash edits for one correlation, applied in one pass per bucket.
  struct Flips {
    explicit Flips(std::size_t targets) : adds(targets), drop_hosts(targets), drop_keys(targets) {}
    std::vector<std::vector<StashEntry>> adds;
    std::vector<std::vector<HostBucketId>> drop_hosts;
    std::vector<std::vector<ClusteredKey>> drop_keys;
    /// Host -> targets whose cell became an outlier and must be collected.
    std::map<HostBucketId, std::vector<TargetBucketId>> collect;
  };

  CorrelationState& mutable_correlation(std::string_view column) {
    for (auto& c : idx_.correlations_)
      if (c.column == column) return c;
    throw Error("column '" + std::string(column) + "' is not an indexed target column");
  }

  static void count_events(const std::vector<StructuralEvent>& events, ChangeReport& rep) {
    for (const auto& e : events) {
      if (e.kind == StructuralEvent::Kind::split) ++rep.host_splits;
      else ++rep.host_merges;
    }
  }

  /// Contribution of the given hosts to P0 under the current host sizes.
  std::uint64_t contribution(const CorrelationState& c, const std::vector<HostBucketId>& hosts) const {
    std::uint64_t p = 0;
    for (auto h : hosts)
      if (h < c.targets_in_host.size()) p += idx_.host_.count(h) * c.targets_in_host[h].size();
    return p;
  }

  std::uint64_t tracked_contribution(const CorrelationState& c, const std::vector<HostBucketId>& hosts) const {
    std::uint64_t p = 0;
    for (auto h : hosts)
      if (h < c.targets_in_host.size()) p += idx_.tracked_host_size(h) * c.targets_in_host[h].size();
    return p;
  }

  /// Class a cell should have. Budget mode keeps existing classes between
  /// revalidations.
  CellClass classify(std::size_t count, std::size_t host_size, double thr, CellClass current) const {
    if (idx_.policy_.max_stash) return current;
    return is_outlier_cell(count, host_size, thr) ? CellClass::outlier : CellClass::inlier;
  }

  static void sorted_insert(std::vector<HostBucketId>& v, HostBucketId h) {
    auto it = std::lower_bound(v.begin(), v.end(), h);
    if (it == v.end() || *it != h) v.insert(it, h);
  }

  static void sorted_erase(std::vector<HostBucketId>& v, HostBucketId h) {
    auto it = std::lower_bound(v.begin(), v.end(), h);
    if (it != v.end() && *it == h) v.erase(it);
  }

  void create_cell(CorrelationState& c, TargetBucketId t, HostBucketId h, std::size_t count, ChangeReport& rep) {
    c.assignment.cells[t][h] = {count, CellClass::inlier};
    sorted_insert(c.assignment.inlier_map[t], h);
    auto& th = c.targets_in_host[h];
    th.insert(std::lower_bound(th.begin(), th.end(), t), t);
    ++rep.cells_created;
  }

  void erase_cell(CorrelationState& c, TargetBucketId t, HostBucketId h, Flips& f, ChangeReport& rep) {
    auto& cells = c.assignment.cells[t];
    auto it = cells.find(h);
    if (it->second.cls == CellClass::outlier) f.drop_hosts[t].push_back(h);
    else sorted_erase(c.assignment.inlier_map[t], h);
    cells.erase(it);
    auto& th = c.targets_in_host[h];
    th.erase(std::lower_bound(th.begin(), th.end(), t));
    ++rep.cells_removed;
  }

  /// Records a class change of cell (t,h) and the stash edits it implies.
  void flip(CorrelationState& c, TargetBucketId t, HostBucketId h, CellClass to, Flips& f, ChangeReport& rep,
            bool count_flip = true) {
    auto& cell = c.assignment.cells[t].at(h);
    if (cell.cls == to) return;
    cell.cls = to;
    if (to == CellClass::outlier) {
      sorted_erase(c.assignment.inlier_map[t], h);
      f.collect[h].push_back(t);
      if (count_flip) ++rep.cells_flipped_to_outlier;
    } else {
      sorted_insert(c.assignment.inlier_map[t], h);
      auto& adds = f.adds[t];
      adds.erase(std::remove_if(adds.begin(), adds.end(), [h](const StashEntry& e) { return bucket_of(e.key) == h; }),
                 adds.end());
      f.drop_hosts[t].push_back(h);
      if (count_flip) ++rep.cells_flipped_to_inlier;
    }
  }

  void apply_flips(CorrelationState& c, Flips& f, ChangeReport& rep) {
    const auto values = idx_.table_.column(c.column_index);
    for (auto& [h, targets] : f.collect) {
      std::sort(targets.begin(), targets.end());
      auto [first, last] = idx_.table_.rows_in(key_range_of(h));
      for (RowId r = first; r < last; ++r) {
        auto t = c.buckets.locate(values[r]);
        if (std::binary_search(targets.begin(), targets.end(), t)) f.adds[t].push_back({values[r], idx_.table_.key(r)});
      }
    }
    auto& stash = c.assignment.stash;
    for (TargetBucketId t = 0; t < stash.size(); ++t) {
      auto& s = stash[t];
      auto& hosts = f.drop_hosts[t];
      auto& keys = f.drop_keys[t];
      if (!hosts.empty() || !keys.empty()) {
        std::sort(hosts.begin(), hosts.end());
        std::sort(keys.begin(), keys.end());
        auto before = s.size();
        s.erase(std::remove_if(s.begin(), s.end(),
                               [&](const StashEntry& e) {
                                 return std::binary_search(hosts.begin(), hosts.end(), bucket_of(e.key)) ||
                                        std::binary_search(keys.begin(), keys.end(), e.key);
                               }),
                s.end());
        rep.stash_removals += before - s.size();
      }
      auto& adds = f.adds[t];
      if (!adds.empty()) {
        std::sort(adds.begin(), adds.end());
        auto mid = s.size();
        s.insert(s.end(), adds.begin(), adds.end());
        std::inplace_merge(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
        rep.stash_additions += adds.size();
      }
    }
  }

  /// Brings every correlation up to date after the host index and table have
  /// absorbed a batch. `added` are final keys of new rows; `removed` carry the
  /// keys the rows had when deleted.
  void absorb(const std::vector<ClusteredKey>& added, const std::vector<Record>& removed,
              const std::vector<StructuralEvent>& events, ChangeReport& rep) {
    const auto& host = idx_.host_;
    std::set<HostBucketId> retired;
    std::set<HostBucketId> children;
    for (const auto& e : events) {
      retired.insert(e.from.begin(), e.from.end());
      children.insert(e.to.begin(), e.to.end());
    }
    for (auto h : retired) children.erase(h);

    std::set<HostBucketId> touched_set(retired.begin(), retired.end());
    touched_set.insert(children.begin(), children.end());
    for (auto k : added) touched_set.insert(bucket_of(k));
    for (const auto& r : removed) touched_set.insert(bucket_of(r.key));
    const std::vector<HostBucketId> touched(touched_set.begin(), touched_set.end());

    for (auto& c : idx_.correlations_) {
      auto& a = c.assignment;
      const std::uint64_t old_contrib = tracked_contribution(c, touched);
      c.targets_in_host.resize(host.id_limit());
      Flips f(c.buckets.size());
      std::set<std::pair<TargetBucketId, HostBucketId>> fresh;

      for (const auto& rec : removed) {
        auto h = bucket_of(rec.key);
        if (retired.count(h)) continue;
        auto t = c.buckets.locate(rec.values[c.column_index]);
        auto& cell = a.cells[t].at(h);
        if (cell.cls == CellClass::outlier) f.drop_keys[t].push_back(rec.key);
        if (--cell.count == 0) erase_cell(c, t, h, f, rep);
      }

      for (auto h : retired) {
        if (h >= c.targets_in_host.size()) continue;
        auto targets = c.targets_in_host[h];
        for (auto t : targets) erase_cell(c, t, h, f, rep);
      }

      const auto values = idx_.table_.column(c.column_index);
      for (auto h : children) {
        std::map<TargetBucketId, std::size_t> counts;
        auto [first, last] = idx_.table_.rows_in(key_range_of(h));
        for (RowId r = first; r < last; ++r) ++counts[c.buckets.locate(values[r])];
        for (const auto& [t, n] : counts) {
          create_cell(c, t, h, n, rep);
          fresh.emplace(t, h);
        }
      }

      for (auto key : added) {
        auto h = bucket_of(key);
        if (children.count(h)) continue;
        auto row = idx_.table_.find(key);
        if (!row) throw Error("inserted key vanished from the table");
        auto v = values[*row];
        auto t = c.buckets.locate(v);
        auto it = a.cells[t].find(h);
        if (it == a.cells[t].end()) {
          create_cell(c, t, h, 1, rep);
          fresh.emplace(t, h);
          continue;
        }
        ++it->second.count;
        if (it->second.cls == CellClass::outlier) f.adds[t].push_back({v, key});
      }

      c.p0 = c.p0 - old_contrib + contribution(c, touched);

      const double thr = idx_.threshold(c);
      for (auto h : touched) {
        if (!host.is_live(h)) continue;
        for (auto t : c.targets_in_host[h]) {
          const auto& cell = a.cells[t].at(h);
          auto want = classify(cell.count, host.count(h), thr, cell.cls);
          flip(c, t, h, want, f, rep, !fresh.count({t, h}));
        }
      }
      apply_flips(c, f, rep);
    }

    idx_.host_sizes_.resize(host.id_limit(), 0);
    for (auto h : touched) idx_.host_sizes_[h] = host.count(h);
  }

  /// Rebuilds the stash entries of every outlier cell whose entry count is
  /// off, and drops entries that belong to no outlier cell.
  std::size_t repair_coverage(CorrelationState& c, ChangeReport& rep) {
    auto& a = c.assignment;
    Flips f(c.buckets.size());
    std::size_t repaired = 0;
    for (TargetBucketId t = 0; t < a.stash.size(); ++t) {
      std::map<HostBucketId, std::size_t> seen;
      for (const auto& e : a.stash[t]) ++seen[bucket_of(e.key)];
      for (const auto& [h, n] : seen) {
        auto it = a.cells[t].find(h);
        if (it == a.cells[t].end() || it->second.cls != CellClass::outlier || it->second.count != n) {
          f.drop_hosts[t].push_back(h);
          if (it != a.cells[t].end() && it->second.cls == CellClass::outlier) f.collect[h].push_back(t);
          ++repaired;
        }
      }
      for (const auto& [h, cell] : a.cells[t])
        if (cell.cls == CellClass::outlier && !seen.count(h)) {
          f.collect[h].push_back(t);
          ++repaired;
        }
    }
    apply_flips(c, f, rep);
    return repaired;
  }

  CortexIndex& idx_;
};

}  // namespace cortex
