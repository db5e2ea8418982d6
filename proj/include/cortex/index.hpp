#pragma once
// CortexIndex: a table, its host index, and one correlation structure per
// indexed target column.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cortex/column_store.hpp"
#include "cortex/correlation.hpp"
#include "cortex/host_index.hpp"
#include "cortex/stashing.hpp"

namespace cortex {

/// How cells are classified.
struct StashPolicy {
  double alpha = 1.0;
  double beta = 17.88;
  /// When set, a hard stash limit replaces the alpha rule.
  std::optional<std::size_t> max_stash{};
  /// Query frequency per target bucket for the hard-limit mode; empty = uniform.
  std::vector<double> bucket_weights{};
};

struct CorrelationConfig {
  std::string target_column;
  /// Explicit N_t. Takes precedence over lowest_selectivity.
  std::optional<std::size_t> target_buckets{};
  /// s_L of the expected workload; N_t = ceil(1 / s_L).
  std::optional<double> lowest_selectivity{};
  /// Pre-computed bucket edges, e.g. to rebuild with the edges of a live index.
  std::optional<TargetBuckets> edges{};
  /// Host columns the correlation is expected to follow. Informational.
  std::vector<std::string> host_subset{};

  std::size_t resolved_bucket_count() const {
    if (target_buckets) return std::max<std::size_t>(1, *target_buckets);
    return target_buckets_for(lowest_selectivity.value_or(0.001));
  }
};

struct CorrelationState {
  std::string column;
  std::size_t column_index = 0;
  TargetBuckets buckets;
  OutlierAssignment assignment;
  /// Per host bucket id: sorted target buckets with a cell in it (k_h = size).
  std::vector<std::vector<TargetBucketId>> targets_in_host;
  /// Running initial scan overhead, sum_h |h| * k_h.
  std::uint64_t p0 = 0;
};

struct IndexSizes {
  std::size_t stash_entries = 0;
  std::size_t inlier_map_entries = 0;
  std::size_t target_edges = 0;

  static constexpr std::size_t kStashEntryBytes = sizeof(std::int64_t) + sizeof(ClusteredKey);
  static constexpr std::size_t kHostIdBytes = sizeof(HostBucketId);
  static constexpr std::size_t kEdgeBytes = sizeof(std::int64_t);

  std::size_t bytes() const {
    return stash_entries * kStashEntryBytes + inlier_map_entries * kHostIdBytes + target_edges * kEdgeBytes;
  }
};

class UpdateTracker;

class CortexIndex {
 public:
  /// Builds the host index over `table` (re-keying it) and then every correlation.
  static CortexIndex build(Table table, const HostIndexConfig& host_cfg,
                           const std::vector<CorrelationConfig>& correlations, const StashPolicy& policy) {
    auto host = HostIndex::build(table, host_cfg);
    return build_on(std::move(table), std::move(host), correlations, policy);
  }

  /// Builds correlations over a table already keyed by `host`.
  static CortexIndex build_on(Table table, HostIndex host, const std::vector<CorrelationConfig>& correlations,
                              const StashPolicy& policy) {
    if (policy.alpha < 0) throw Error("alpha must be >= 0");
    if (!(policy.beta > 0)) throw Error("beta must be > 0");
    CortexIndex idx;
    idx.table_ = std::move(table);
    idx.host_ = std::move(host);
    idx.policy_ = policy;
    idx.host_sizes_.assign(idx.host_.id_limit(), 0);
    for (auto h : idx.host_.live_ids()) idx.host_sizes_[h] = idx.host_.count(h);
    for (const auto& cfg : correlations) idx.add_correlation(cfg);
    return idx;
  }

  const Table& table() const { return table_; }
  const HostIndex& host() const { return host_; }
  const StashPolicy& policy() const { return policy_; }
  std::size_t record_count() const { return table_.row_count(); }
  std::span<const CorrelationState> correlations() const { return correlations_; }

  const CorrelationState* find_correlation(std::string_view column) const {
    for (const auto& c : correlations_)
      if (c.column == column) return &c;
    return nullptr;
  }

  const CorrelationState& correlation(std::string_view column) const {
    if (auto* c = find_correlation(column)) return *c;
    throw Error("column '" + std::string(column) + "' is not an indexed target column");
  }

  CostParams cost_params(const CorrelationState& c) const {
    return {policy_.alpha, policy_.beta, record_count(), c.p0};
  }

  double threshold(const CorrelationState& c) const { return cost_params(c).threshold(); }

  /// Current cells of a correlation as a flat grid, with matching classes.
  std::pair<CellGrid, Classification> grid(const CorrelationState& c) const {
    CellGrid g;
    Classification cls;
    g.target_count = c.buckets.size();
    g.host_sizes = host_sizes_;
    for (TargetBucketId t = 0; t < c.assignment.cells.size(); ++t)
      for (const auto& [h, cell] : c.assignment.cells[t]) {
        g.cells.push_back({t, h, cell.count});
        cls.push_back(cell.cls);
      }
    return {std::move(g), std::move(cls)};
  }

  /// P0 recounted from the host index and the cell maps.
  std::uint64_t recompute_p0(const CorrelationState& c) const {
    std::uint64_t p0 = 0;
    for (const auto& row : c.assignment.cells)
      for (const auto& [h, cell] : row) p0 += host_.count(h);
    return p0;
  }

  IndexSizes sizes(std::string_view column) const {
    const auto& c = correlation(column);
    return {c.assignment.stash_size(), c.assignment.inlier_map_entries(), c.buckets.size() + 1};
  }

  IndexSizes sizes() const {
    IndexSizes s;
    for (const auto& c : correlations_) {
      auto one = sizes(c.column);
      s.stash_entries += one.stash_entries;
      s.inlier_map_entries += one.inlier_map_entries;
      s.target_edges += one.target_edges;
    }
    return s;
  }

  /// Throws on the first violated structural invariant.
  void check_invariants() const {
    table_.check_invariants();
    host_.check_partition(table_);
    for (HostBucketId h = 0; h < host_.id_limit(); ++h)
      if (tracked_host_size(h) != host_.count(h)) throw Error("tracked host size out of sync");
    for (const auto& c : correlations_) check_correlation(c);
  }

  void check_correlation(const CorrelationState& c) const {
    const auto& a = c.assignment;
    const std::string where = "correlation '" + c.column + "': ";
    if (a.cells.size() != c.buckets.size() || a.inlier_map.size() != c.buckets.size() ||
        a.stash.size() != c.buckets.size())
      throw Error(where + "per-bucket structures sized inconsistently");
    std::vector<std::size_t> per_host(host_.id_limit(), 0);
    std::size_t total = 0;
    for (TargetBucketId t = 0; t < a.cells.size(); ++t) {
      std::vector<HostBucketId> inliers;
      std::size_t stashed = 0;
      for (const auto& [h, cell] : a.cells[t]) {
        if (cell.count == 0) throw Error(where + "empty cell kept");
        if (!host_.is_live(h)) throw Error(where + "cell refers to a retired host bucket");
        per_host[h] += cell.count;
        total += cell.count;
        if (cell.cls == CellClass::inlier) inliers.push_back(h);
        else stashed += cell.count;
        const auto& th = c.targets_in_host.at(h);
        if (!std::binary_search(th.begin(), th.end(), t)) throw Error(where + "targets_in_host missing a cell");
      }
      if (inliers != a.inlier_map[t]) throw Error(where + "inlier map disagrees with cell classes");
      const auto& s = a.stash[t];
      if (s.size() != stashed) throw Error(where + "stash size disagrees with outlier cell counts");
      if (!std::is_sorted(s.begin(), s.end())) throw Error(where + "stash not sorted");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0 && s[i].key == s[i - 1].key) throw Error(where + "duplicate stash entry");
        auto row = table_.find(s[i].key);
        if (!row) throw Error(where + "stash entry for a missing record");
        if (table_.value(c.column_index, *row) != s[i].value) throw Error(where + "stale stash value");
        if (c.buckets.locate(s[i].value) != t) throw Error(where + "stash entry in the wrong bucket");
        auto it = a.cells[t].find(bucket_of(s[i].key));
        if (it == a.cells[t].end() || it->second.cls != CellClass::outlier)
          throw Error(where + "stash entry outside an outlier cell");
      }
    }
    if (total != record_count()) throw Error(where + "cell counts do not sum to N");
    std::size_t k_total = 0;
    for (HostBucketId h = 0; h < host_.id_limit(); ++h) {
      if (per_host[h] != host_.count(h)) throw Error(where + "cells do not sum to |h|");
      if (h < c.targets_in_host.size()) k_total += c.targets_in_host[h].size();
    }
    if (k_total != a.cell_count()) throw Error(where + "targets_in_host has extra entries");
    if (c.p0 != recompute_p0(c)) throw Error(where + "running P0 differs from recount");
  }

  std::size_t tracked_host_size(HostBucketId h) const { return h < host_sizes_.size() ? host_sizes_[h] : 0; }

 private:
  friend class UpdateTracker;

  void add_correlation(const CorrelationConfig& cfg) {
    if (find_correlation(cfg.target_column)) throw Error("column '" + cfg.target_column + "' indexed twice");
    CorrelationState c;
    c.column = cfg.target_column;
    c.column_index = table_.column_index(cfg.target_column);
    auto values = table_.column(c.column_index);
    if (cfg.edges) {
      c.buckets = *cfg.edges;
      for (auto v : values) c.buckets.extend_to(v);
    } else if (values.empty()) {
      c.buckets = TargetBuckets::from_edges({0}, 1);
    } else {
      c.buckets = build_target_buckets(values, cfg.resolved_bucket_count());
    }
    auto grid = build_cell_grid(table_, host_, c.column_index, c.buckets);
    Classification cls;
    if (policy_.max_stash) {
      cls = assign_outliers_budget(grid, *policy_.max_stash, policy_.beta, policy_.bucket_weights);
    } else {
      cls = assign_outliers_alpha(grid, policy_.alpha, policy_.beta);
    }
    c.assignment = materialize_assignment(table_, c.column_index, c.buckets, grid, cls);
    c.targets_in_host.assign(host_.id_limit(), {});
    for (const auto& cell : grid.cells) c.targets_in_host[cell.host].push_back(cell.target);
    c.p0 = initial_scan_overhead(grid);
    correlations_.push_back(std::move(c));
  }

  Table table_;
  HostIndex host_;
  StashPolicy policy_;
  std::vector<CorrelationState> correlations_;
  /// |h| as last seen by the tracker, by host bucket id.
  std::vector<std::size_t> host_sizes_;
};

}  // namespace cortex
