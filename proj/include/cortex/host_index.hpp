#pragma once
// Host (primary) index: partitions records into host buckets, each of which
// owns one contiguous clustered-key range.
//
// Two partitioners are provided:
//   - clustered_1d: equi-depth ranges over one host column.
//   - octree: recursive 2^d splitting of the bounding box of d host columns.
//
// Clustered keys are make_key(bucket id, counter). Splits and merges retire
// the old bucket ids and re-key the affected records into fresh buckets; the
// resulting StructuralEvents tell dependants which buckets were replaced.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cortex/column_store.hpp"
#include "cortex/common.hpp"

namespace cortex {

struct HostIndexConfig {
  enum class Variant { clustered_1d, octree };

  Variant variant = Variant::clustered_1d;
  std::vector<std::string> columns;
  std::size_t max_buckets = 100000;
  std::size_t max_leaf = 10000;

  static HostIndexConfig clustered(std::string column, std::size_t max_buckets = 100000) {
    HostIndexConfig c;
    c.variant = Variant::clustered_1d;
    c.columns = {std::move(column)};
    c.max_buckets = max_buckets;
    return c;
  }

  static HostIndexConfig octree(std::vector<std::string> columns, std::size_t max_leaf = 10000) {
    HostIndexConfig c;
    c.variant = Variant::octree;
    c.columns = std::move(columns);
    c.max_leaf = max_leaf;
    return c;
  }
};

inline const char* to_string(HostIndexConfig::Variant v) {
  return v == HostIndexConfig::Variant::octree ? "octree" : "clustered_1d";
}

struct HostBucket {
  HostBucketId id = 0;
  KeyRange key_range;
  std::size_t count = 0;
};

struct StructuralEvent {
  enum class Kind { split, merge };
  Kind kind = Kind::split;
  std::vector<HostBucketId> from;
  std::vector<HostBucketId> to;
};

struct InsertOutcome {
  /// Final clustered key and bucket of each inserted record, in input order.
  std::vector<ClusteredKey> keys;
  std::vector<HostBucketId> buckets;
  std::vector<StructuralEvent> events;
  /// Records whose host values fell outside the indexed domain.
  std::size_t clamped = 0;
};

struct DeleteOutcome {
  std::vector<Record> removed;
  std::vector<StructuralEvent> events;
};

class HostIndex {
 public:
  /// Partitions the table and re-keys every row so that each bucket is a
  /// contiguous key range. The table is re-sorted in place.
  static HostIndex build(Table& table, const HostIndexConfig& cfg) {
    HostIndex idx;
    idx.cfg_ = cfg;
    if (cfg.columns.empty()) throw Error("host index needs at least one column");
    for (const auto& name : cfg.columns) idx.cols_.push_back(table.column_index(name));
    if (cfg.variant == HostIndexConfig::Variant::clustered_1d) {
      if (cfg.columns.size() != 1) throw Error("clustered_1d host index takes exactly one column");
      if (cfg.max_buckets < 1) throw Error("max_buckets must be >= 1");
      idx.build_1d(table);
    } else {
      if (cfg.columns.size() < 2) throw Error("octree host index needs at least 2 columns");
      if (cfg.columns.size() > 16) throw Error("octree host index supports at most 16 columns");
      if (cfg.max_leaf < 1) throw Error("max_leaf must be >= 1");
      idx.build_octree(table);
    }
    return idx;
  }

  const HostIndexConfig& config() const { return cfg_; }
  bool is_octree() const { return cfg_.variant == HostIndexConfig::Variant::octree; }
  std::span<const std::size_t> host_columns() const { return cols_; }
  std::size_t dims() const { return cols_.size(); }

  std::vector<std::int64_t> host_values(const Table& table, RowId r) const {
    std::vector<std::int64_t> v(cols_.size());
    for (std::size_t d = 0; d < cols_.size(); ++d) v[d] = table.value(cols_[d], r);
    return v;
  }

  /// Bucket whose region contains the point. Coordinates outside the indexed
  /// domain land in the nearest boundary bucket.
  HostBucketId locate(std::span<const std::int64_t> point) const {
    if (point.size() != cols_.size()) throw Error("locate: wrong number of host values");
    if (!is_octree()) {
      auto it = std::upper_bound(edges_.begin(), edges_.end(), point[0]);
      return slot_ids_[static_cast<std::size_t>(it - edges_.begin()) - 1];
    }
    std::uint32_t n = 0;
    while (nodes_[n].first_child >= 0) n = nodes_[n].first_child + child_index(n, point);
    return nodes_[n].bucket;
  }

  /// True when the point lies outside the bounds the index was built over.
  bool outside_domain(std::span<const std::int64_t> point) const {
    if (!is_octree()) return false;
    for (std::size_t d = 0; d < point.size(); ++d)
      if (point[d] < lo(0, d) || point[d] > hi(0, d)) return true;
    return false;
  }

  /// Effective region of a live bucket: one half-open interval per host
  /// column. Boundary buckets extend to the int64 limits.
  std::vector<ValueRange> region(HostBucketId id) const {
    check_live(id);
    if (!is_octree()) {
      auto slot = slot_of(id);
      std::int64_t hi = slot + 1 < edges_.size() ? edges_[slot + 1] : kMaxValue;
      return {{edges_[slot], hi}};
    }
    auto n = node_of_bucket_.at(id);
    std::vector<ValueRange> out(dims());
    for (std::size_t d = 0; d < dims(); ++d) {
      out[d].lo = lo(n, d) == lo(0, d) ? kMinValue : lo(n, d);
      out[d].hi = hi(n, d) == hi(0, d) ? kMaxValue : hi(n, d) + 1;
    }
    return out;
  }

  /// Buckets whose regions intersect the box. A missing interval is unbounded.
  std::vector<HostBucketId> range_lookup(std::span<const std::optional<ValueRange>> box) const {
    if (box.size() > dims()) throw Error("range_lookup: too many intervals");
    std::vector<ValueRange> q(dims(), unbounded_range());
    for (std::size_t d = 0; d < box.size(); ++d) {
      if (!box[d]) continue;
      if (box[d]->empty()) return {};
      q[d] = *box[d];
    }
    std::vector<HostBucketId> out;
    if (!is_octree()) {
      auto first = std::upper_bound(edges_.begin(), edges_.end(), q[0].lo) - edges_.begin() - 1;
      auto last = std::upper_bound(edges_.begin(), edges_.end(), q[0].hi - 1) - edges_.begin() - 1;
      for (auto s = first; s <= last; ++s) out.push_back(slot_ids_[s]);
    } else {
      std::vector<std::uint32_t> stack{0};
      while (!stack.empty()) {
        auto n = stack.back();
        stack.pop_back();
        bool hit = true;
        for (std::size_t d = 0; d < dims() && hit; ++d) {
          ValueRange r{lo(n, d) == lo(0, d) ? kMinValue : lo(n, d),
                       hi(n, d) == hi(0, d) ? kMaxValue : hi(n, d) + 1};
          hit = r.intersects(q[d]);
        }
        if (!hit) continue;
        if (nodes_[n].first_child < 0) {
          out.push_back(nodes_[n].bucket);
        } else {
          auto kids = std::uint32_t{1} << std::popcount(nodes_[n].split_mask);
          for (std::uint32_t c = 0; c < kids; ++c) stack.push_back(nodes_[n].first_child + c);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t count(HostBucketId id) const { return id < state_.size() ? state_[id].count : 0; }
  bool is_live(HostBucketId id) const { return id < state_.size() && state_[id].live; }
  /// One past the largest bucket id ever issued.
  HostBucketId id_limit() const { return static_cast<HostBucketId>(state_.size()); }

  std::vector<HostBucketId> live_ids() const {
    std::vector<HostBucketId> ids;
    for (HostBucketId i = 0; i < state_.size(); ++i)
      if (state_[i].live) ids.push_back(i);
    return ids;
  }

  std::size_t bucket_count() const { return live_count_; }

  std::vector<HostBucket> buckets() const {
    std::vector<HostBucket> out;
    for (auto id : live_ids()) out.push_back({id, key_range_of(id), state_[id].count});
    return out;
  }

  /// Record count above which a bucket splits on insert.
  std::size_t split_threshold() const { return is_octree() ? cfg_.max_leaf : 2 * capacity_; }
  /// Target records per 1-D bucket chosen at build time.
  std::size_t capacity() const { return is_octree() ? cfg_.max_leaf : capacity_; }
  std::size_t clamped_total() const { return clamped_total_; }

  /// Assigns keys to new records, appends them to the table, then splits
  /// buckets that overflowed. Exclusive access required.
  InsertOutcome apply_insert(Table& table, const std::vector<std::vector<std::int64_t>>& rows) {
    InsertOutcome out;
    out.keys.resize(rows.size());
    std::vector<Record> pending;
    pending.reserve(rows.size());
    std::vector<HostBucketId> touched;
    std::vector<std::int64_t> point(dims());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != table.column_count()) throw Error("insert: record arity does not match table");
      for (std::size_t d = 0; d < dims(); ++d) point[d] = rows[i][cols_[d]];
      if (outside_domain(point)) ++out.clamped;
      auto h = locate(point);
      if (state_[h].next_counter >= kCounterLimit) {
        table.append(std::move(pending));
        pending.clear();
        reorganize(table, h, /*forced=*/true, out.events);
        h = locate(point);
      }
      auto key = make_key(h, state_[h].next_counter++);
      ++state_[h].count;
      out.keys[i] = key;
      pending.push_back({key, rows[i]});
      touched.push_back(h);
    }
    table.append(std::move(pending));
    clamped_total_ += out.clamped;

    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (auto h : touched)
      if (state_[h].live && state_[h].count > split_threshold()) reorganize(table, h, false, out.events);

    if (!move_log_.empty()) {
      std::unordered_map<ClusteredKey, std::size_t> pos;
      for (std::size_t i = 0; i < out.keys.size(); ++i) pos.emplace(out.keys[i], i);
      for (const auto& [from, to] : move_log_) {
        auto it = pos.find(from);
        if (it == pos.end()) continue;
        auto i = it->second;
        pos.erase(it);
        out.keys[i] = to;
        pos.emplace(to, i);
      }
      move_log_.clear();
    }
    out.buckets.resize(out.keys.size());
    for (std::size_t i = 0; i < out.keys.size(); ++i) out.buckets[i] = bucket_of(out.keys[i]);
    return out;
  }

  /// Removes records; adjacent under-filled 1-D buckets are merged.
  DeleteOutcome apply_delete(Table& table, std::span<const ClusteredKey> keys) {
    DeleteOutcome out;
    out.removed = table.erase(keys);
    std::vector<HostBucketId> touched;
    for (const auto& rec : out.removed) {
      auto h = bucket_of(rec.key);
      --state_[h].count;
      touched.push_back(h);
    }
    if (is_octree()) return out;
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (auto h : touched) {
      if (!state_[h].live || !underfilled(h)) continue;
      auto slot = slot_of(h);
      std::optional<std::size_t> partner;
      if (slot + 1 < slot_ids_.size() && underfilled(slot_ids_[slot + 1])) partner = slot + 1;
      else if (slot > 0 && underfilled(slot_ids_[slot - 1])) partner = slot - 1;
      if (!partner) continue;
      merge_slots(table, std::min(slot, *partner), out.events);
    }
    return out;
  }

  /// Throws unless buckets partition the table exactly.
  void check_partition(const Table& table) const {
    std::vector<std::size_t> seen(state_.size(), 0);
    for (RowId r = 0; r < table.row_count(); ++r) {
      auto h = bucket_of(table.key(r));
      if (!is_live(h)) throw Error("row keyed into a retired bucket");
      ++seen[h];
      auto v = host_values(table, r);
      if (locate(v) != h) throw Error("row stored outside the bucket its host values locate to");
    }
    std::size_t total = 0;
    for (HostBucketId h = 0; h < state_.size(); ++h) {
      if (seen[h] != state_[h].count) throw Error("bucket count out of sync with table");
      total += state_[h].count;
    }
    if (total != table.row_count()) throw Error("bucket counts do not sum to N");
  }

 private:
  struct BucketState {
    std::size_t count = 0;
    std::uint64_t next_counter = 0;
    bool live = false;
  };

  struct Node {
    std::int32_t first_child = -1;
    std::uint32_t split_mask = 0;
    HostBucketId bucket = 0;
  };

  // ---- bookkeeping ---------------------------------------------------------

  HostBucketId new_bucket(std::size_t count) {
    if (state_.size() > kMaxBucketId) throw Error("host bucket id space exhausted");
    auto id = static_cast<HostBucketId>(state_.size());
    state_.push_back({count, count, true});
    ++live_count_;
    return id;
  }

  void retire(HostBucketId id) {
    state_[id].live = false;
    state_[id].count = 0;
    --live_count_;
  }

  void check_live(HostBucketId id) const {
    if (!is_live(id)) throw Error("host bucket " + std::to_string(id) + " is not live");
  }

  bool underfilled(HostBucketId id) const { return 4 * state_[id].count < capacity_; }

  std::size_t slot_of(HostBucketId id) const {
    auto edge = lower_edge_.at(id);
    return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), edge) - edges_.begin()) - 1;
  }

  // ---- 1-D -----------------------------------------------------------------

  void build_1d(Table& table) {
    const auto n = table.row_count();
    const auto col = table.column(cols_[0]);
    std::vector<RowId> order(n);
    std::iota(order.begin(), order.end(), RowId{0});
    std::stable_sort(order.begin(), order.end(), [&](RowId a, RowId b) { return col[a] < col[b]; });
    const std::size_t target = std::min(cfg_.max_buckets, std::max<std::size_t>(n, 1));
    capacity_ = std::max<std::size_t>(1, (n + cfg_.max_buckets - 1) / cfg_.max_buckets);

    std::vector<ClusteredKey> keys(n);
    std::size_t start = 0;
    for (std::size_t b = 1; start < n || b == 1; ++b) {
      std::size_t end = b >= target ? n : std::max(b * n / target, start + 1);
      while (end < n && end > 0 && col[order[end]] == col[order[end - 1]]) ++end;
      end = std::min(end, n);
      auto id = new_bucket(end - start);
      std::int64_t edge = edges_.empty() ? kMinValue : col[order[start]];
      edges_.push_back(edge);
      slot_ids_.push_back(id);
      lower_edge_.push_back(edge);
      for (std::size_t i = start; i < end; ++i) keys[order[i]] = make_key(id, i - start);
      start = end;
      if (n == 0) break;
    }
    table.assign_keys(keys);
  }

  /// Splits sorted values [first, last) into pieces of at most `limit`
  /// records, cutting only between distinct values. Returns cut positions.
  static void cut_sorted(std::span<const std::int64_t> v, std::size_t first, std::size_t last,
                         std::size_t limit, std::vector<std::size_t>& cuts) {
    if (last - first <= limit || v[first] == v[last - 1]) return;
    const std::size_t mid = first + (last - first) / 2;
    std::size_t up = mid;
    while (up < last && v[up] == v[up - 1]) ++up;
    std::size_t down = mid;
    while (down > first && v[down] == v[down - 1]) --down;
    std::size_t cut;
    if (up == last) cut = down;
    else if (down == first) cut = up;
    else cut = (up - mid) <= (mid - down) ? up : down;
    cut_sorted(v, first, cut, limit, cuts);
    cuts.push_back(cut);
    cut_sorted(v, cut, last, limit, cuts);
  }

  void merge_slots(Table& table, std::size_t slot, std::vector<StructuralEvent>& events) {
    auto a = slot_ids_[slot];
    auto b = slot_ids_[slot + 1];
    std::vector<std::pair<ClusteredKey, ClusteredKey>> moves;
    auto id = new_bucket(state_[a].count + state_[b].count);
    std::uint64_t counter = 0;
    for (auto src : {a, b}) {
      auto [first, last] = table.rows_in(key_range_of(src));
      for (RowId r = first; r < last; ++r) moves.emplace_back(table.key(r), make_key(id, counter++));
    }
    lower_edge_.resize(state_.size());
    lower_edge_[id] = edges_[slot];
    edges_.erase(edges_.begin() + static_cast<std::ptrdiff_t>(slot) + 1);
    slot_ids_.erase(slot_ids_.begin() + static_cast<std::ptrdiff_t>(slot) + 1);
    slot_ids_[slot] = id;
    retire(a);
    retire(b);
    table.rekey(moves);
    events.push_back({StructuralEvent::Kind::merge, {a, b}, {id}});
  }

  // ---- octree --------------------------------------------------------------

  std::int64_t lo(std::size_t node, std::size_t d) const { return box_lo_[node * dims() + d]; }
  std::int64_t hi(std::size_t node, std::size_t d) const { return box_hi_[node * dims() + d]; }

  /// Split coordinate for an inclusive box [lo, hi] with lo < hi; values equal
  /// to it go to the upper child.
  static std::int64_t split_point(std::int64_t lo, std::int64_t hi) {
    auto diff = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + diff / 2 + diff % 2);
  }

  std::uint32_t child_index(std::uint32_t n, std::span<const std::int64_t> p) const {
    std::uint32_t idx = 0;
    std::uint32_t bit = 0;
    for (std::size_t d = 0; d < dims(); ++d) {
      if (!(nodes_[n].split_mask & (1u << d))) continue;
      if (p[d] >= split_point(lo(n, d), hi(n, d))) idx |= 1u << bit;
      ++bit;
    }
    return idx;
  }

  std::uint32_t add_node(std::span<const std::int64_t> lo, std::span<const std::int64_t> hi) {
    nodes_.push_back({});
    box_lo_.insert(box_lo_.end(), lo.begin(), lo.end());
    box_hi_.insert(box_hi_.end(), hi.begin(), hi.end());
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  /// Points are flattened: row i occupies pts[i*dims() .. +dims()).
  bool splittable(std::uint32_t n, const std::vector<std::int64_t>& pts, std::span<const std::size_t> members) const {
    bool box_ok = false;
    for (std::size_t d = 0; d < dims(); ++d) box_ok |= lo(n, d) < hi(n, d);
    if (!box_ok || members.empty()) return false;
    const auto* first = &pts[members[0] * dims()];
    for (auto m : members)
      if (!std::equal(first, first + dims(), &pts[m * dims()])) return true;
    return false;
  }

  /// Turns leaf n (holding `members`) into a subtree whose leaves hold at most
  /// max_leaf points (or hit the duplicate floor). Appends (leaf node, members)
  /// pairs in DFS order.
  void subdivide(std::uint32_t n, const std::vector<std::int64_t>& pts, std::vector<std::size_t> members,
                 std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>>& leaves) {
    if (members.size() <= cfg_.max_leaf || !splittable(n, pts, members)) {
      leaves.emplace_back(n, std::move(members));
      return;
    }
    std::uint32_t mask = 0;
    for (std::size_t d = 0; d < dims(); ++d)
      if (lo(n, d) < hi(n, d)) mask |= 1u << d;
    const std::uint32_t kids = 1u << std::popcount(mask);
    const auto first = static_cast<std::int32_t>(nodes_.size());
    std::vector<std::int64_t> clo(dims());
    std::vector<std::int64_t> chi(dims());
    for (std::uint32_t c = 0; c < kids; ++c) {
      std::uint32_t bit = 0;
      for (std::size_t d = 0; d < dims(); ++d) {
        clo[d] = lo(n, d);
        chi[d] = hi(n, d);
        if (!(mask & (1u << d))) continue;
        auto m = split_point(lo(n, d), hi(n, d));
        if (c & (1u << bit)) clo[d] = m;
        else chi[d] = m - 1;
        ++bit;
      }
      add_node(clo, chi);
    }
    nodes_[n].first_child = first;
    nodes_[n].split_mask = mask;
    std::vector<std::vector<std::size_t>> parts(kids);
    for (auto m : members)
      parts[child_index(n, std::span<const std::int64_t>(&pts[m * dims()], dims()))].push_back(m);
    members.clear();
    members.shrink_to_fit();
    for (std::uint32_t c = 0; c < kids; ++c)
      subdivide(static_cast<std::uint32_t>(first) + c, pts, std::move(parts[c]), leaves);
  }

  void build_octree(Table& table) {
    const auto n = table.row_count();
    std::vector<std::int64_t> pts(n * dims());
    for (RowId r = 0; r < n; ++r)
      for (std::size_t d = 0; d < dims(); ++d) pts[r * dims() + d] = table.value(cols_[d], r);
    std::vector<std::int64_t> blo(dims(), 0);
    std::vector<std::int64_t> bhi(dims(), 0);
    for (std::size_t d = 0; d < dims() && n > 0; ++d) {
      blo[d] = bhi[d] = pts[d];
      for (RowId r = 0; r < n; ++r) {
        blo[d] = std::min(blo[d], pts[r * dims() + d]);
        bhi[d] = std::max(bhi[d], pts[r * dims() + d]);
      }
    }
    add_node(blo, bhi);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> leaves;
    subdivide(0, pts, std::move(all), leaves);

    std::vector<ClusteredKey> keys(n);
    for (auto& [node, members] : leaves) {
      auto id = new_bucket(members.size());
      nodes_[node].bucket = id;
      node_of_bucket_.resize(state_.size());
      node_of_bucket_[id] = node;
      for (std::size_t i = 0; i < members.size(); ++i) keys[members[i]] = make_key(id, i);
    }
    table.assign_keys(keys);
  }

  // ---- restructuring -------------------------------------------------------

  /// Splits bucket h into final pieces (or, when forced and unsplittable,
  /// re-keys it into one fresh bucket). Returns false if nothing changed.
  bool reorganize(Table& table, HostBucketId h, bool forced, std::vector<StructuralEvent>& events) {
    auto [first, last] = table.rows_in(key_range_of(h));
    const std::size_t count = last - first;
    std::vector<ClusteredKey> old_keys(table.keys().begin() + static_cast<std::ptrdiff_t>(first),
                                       table.keys().begin() + static_cast<std::ptrdiff_t>(last));
    std::vector<std::vector<std::size_t>> pieces;  // indexes into old_keys
    std::vector<std::int64_t> piece_edges;

    if (!is_octree()) {
      std::vector<std::size_t> order(count);
      std::iota(order.begin(), order.end(), std::size_t{0});
      auto col = table.column(cols_[0]);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return col[first + a] < col[first + b]; });
      std::vector<std::int64_t> sorted(count);
      for (std::size_t i = 0; i < count; ++i) sorted[i] = col[first + order[i]];
      std::vector<std::size_t> cuts;
      if (count > 0) cut_sorted(sorted, 0, count, 2 * capacity_, cuts);
      if (cuts.empty() && !forced) return false;
      cuts.insert(cuts.begin(), 0);
      cuts.push_back(count);
      for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        pieces.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cuts[p]),
                            order.begin() + static_cast<std::ptrdiff_t>(cuts[p + 1]));
        piece_edges.push_back(p == 0 ? lower_edge_[h] : sorted[cuts[p]]);
      }
      auto slot = slot_of(h);
      std::vector<HostBucketId> ids;
      for (std::size_t p = 0; p < pieces.size(); ++p) ids.push_back(new_bucket(pieces[p].size()));
      lower_edge_.resize(state_.size());
      for (std::size_t p = 0; p < pieces.size(); ++p) lower_edge_[ids[p]] = piece_edges[p];
      edges_.erase(edges_.begin() + static_cast<std::ptrdiff_t>(slot));
      slot_ids_.erase(slot_ids_.begin() + static_cast<std::ptrdiff_t>(slot));
      edges_.insert(edges_.begin() + static_cast<std::ptrdiff_t>(slot), piece_edges.begin(), piece_edges.end());
      slot_ids_.insert(slot_ids_.begin() + static_cast<std::ptrdiff_t>(slot), ids.begin(), ids.end());
      finish_reorganize(table, h, old_keys, pieces, ids, events);
      return true;
    }

    auto node = node_of_bucket_.at(h);
    std::vector<std::int64_t> pts(count * dims());
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t d = 0; d < dims(); ++d) pts[i * dims() + d] = table.value(cols_[d], first + i);
    std::vector<std::size_t> members(count);
    std::iota(members.begin(), members.end(), std::size_t{0});
    if (!splittable(node, pts, members) || count <= cfg_.max_leaf) {
      if (!forced) return false;
      pieces.push_back(std::move(members));
      std::vector<HostBucketId> ids{new_bucket(count)};
      node_of_bucket_.resize(state_.size());
      node_of_bucket_[ids[0]] = node;
      nodes_[node].bucket = ids[0];
      finish_reorganize(table, h, old_keys, pieces, ids, events);
      return true;
    }
    std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> leaves;
    subdivide(node, pts, std::move(members), leaves);
    std::vector<HostBucketId> ids;
    for (auto& [leaf, m] : leaves) {
      auto id = new_bucket(m.size());
      node_of_bucket_.resize(state_.size());
      node_of_bucket_[id] = leaf;
      nodes_[leaf].bucket = id;
      ids.push_back(id);
      pieces.push_back(std::move(m));
    }
    finish_reorganize(table, h, old_keys, pieces, ids, events);
    return true;
  }

  void finish_reorganize(Table& table, HostBucketId h, const std::vector<ClusteredKey>& old_keys,
                         const std::vector<std::vector<std::size_t>>& pieces,
                         const std::vector<HostBucketId>& ids, std::vector<StructuralEvent>& events) {
    std::vector<std::pair<ClusteredKey, ClusteredKey>> moves;
    moves.reserve(old_keys.size());
    for (std::size_t p = 0; p < pieces.size(); ++p)
      for (std::size_t i = 0; i < pieces[p].size(); ++i)
        moves.emplace_back(old_keys[pieces[p][i]], make_key(ids[p], i));
    retire(h);
    table.rekey(moves);
    move_log_.insert(move_log_.end(), moves.begin(), moves.end());
    events.push_back({StructuralEvent::Kind::split, {h}, ids});
  }

  HostIndexConfig cfg_;
  std::vector<std::size_t> cols_;
  std::vector<BucketState> state_;
  std::size_t live_count_ = 0;
  std::size_t clamped_total_ = 0;
  std::size_t capacity_ = 1;

  // clustered_1d: slot s covers [edges_[s], edges_[s+1]) and holds slot_ids_[s].
  std::vector<std::int64_t> edges_;
  std::vector<HostBucketId> slot_ids_;
  std::vector<std::int64_t> lower_edge_;  // by bucket id

  // octree: node boxes are inclusive [lo, hi] per dimension.
  std::vector<Node> nodes_;
  std::vector<std::int64_t> box_lo_;
  std::vector<std::int64_t> box_hi_;
  std::vector<std::uint32_t> node_of_bucket_;

  // Key moves made during the current apply_insert, in order.
  std::vector<std::pair<ClusteredKey, ClusteredKey>> move_log_;
};

}  // namespace cortex
