#pragma once
// Read-optimized in-memory column store.
//
// Every attribute is held as a vector of 64-bit signed integers. Decimal
// columns are scaled by a power of ten, categorical columns are dictionary
// encoded. Rows are kept sorted by clustered key so that a host bucket is a
// contiguous run of rows and a point lookup is a binary search.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cortex/common.hpp"

namespace cortex {

enum class ColumnKind : std::uint8_t { integer = 0, scaled_float = 1, categorical = 2 };

inline const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::integer: return "integer";
    case ColumnKind::scaled_float: return "scaled_float";
    case ColumnKind::categorical: return "categorical";
  }
  return "?";
}

inline constexpr int kMaxScaleExponent = 6;

struct ColumnMeta {
  std::string name;
  ColumnKind kind = ColumnKind::integer;
  /// Power of ten applied to scaled_float columns.
  int exponent = 0;
  /// raw string -> dense code, categorical only.
  std::map<std::string, std::int64_t, std::less<>> dictionary;
  /// Set when ingestion had to truncate digits beyond kMaxScaleExponent.
  bool truncated = false;

  static ColumnMeta integer(std::string name) { return make(std::move(name), ColumnKind::integer); }
  static ColumnMeta scaled(std::string name, int exponent) {
    auto m = make(std::move(name), ColumnKind::scaled_float);
    m.exponent = exponent;
    return m;
  }
  static ColumnMeta categorical(std::string name) { return make(std::move(name), ColumnKind::categorical); }

 private:
  static ColumnMeta make(std::string name, ColumnKind kind) {
    ColumnMeta m;
    m.name = std::move(name);
    m.kind = kind;
    return m;
  }
};

enum class EncodeMode { read_only, append };

namespace detail {

inline bool is_null_token(std::string_view s) {
  return s.empty() || s == "NULL" || s == "null" || s == "NA" || s == "\\N";
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Sign, integral digits and fractional digits of a plain decimal literal.
struct Decimal {
  bool negative = false;
  std::string_view integral;
  std::string_view fraction;

  /// Fractional digits after stripping trailing zeros.
  int significant_fraction_digits() const {
    auto f = fraction;
    while (!f.empty() && f.back() == '0') f.remove_suffix(1);
    return static_cast<int>(f.size());
  }
};

inline std::optional<Decimal> parse_decimal(std::string_view s) {
  Decimal d;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    d.negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  d.integral = s.substr(0, dot);
  if (dot != std::string_view::npos) d.fraction = s.substr(dot + 1);
  if (d.integral.empty() && d.fraction.empty()) return std::nullopt;
  auto digits = [](std::string_view p) {
    return std::all_of(p.begin(), p.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!digits(d.integral) || !digits(d.fraction)) return std::nullopt;
  return d;
}

/// Scales a decimal by 10^exponent, truncating surplus fractional digits.
/// Returns nullopt on overflow.
inline std::optional<std::int64_t> scale_decimal(const Decimal& d, int exponent, bool* truncated) {
  __int128 acc = 0;
  constexpr __int128 kLimit = static_cast<__int128>(kMaxValue);
  auto push = [&](char c) {
    acc = acc * 10 + (c - '0');
    return acc <= kLimit;
  };
  for (char c : d.integral)
    if (!push(c)) return std::nullopt;
  for (int i = 0; i < exponent; ++i) {
    char c = i < static_cast<int>(d.fraction.size()) ? d.fraction[i] : '0';
    if (!push(c)) return std::nullopt;
  }
  if (truncated != nullptr) {
    for (std::size_t i = exponent; i < d.fraction.size(); ++i)
      if (d.fraction[i] != '0') *truncated = true;
  }
  auto v = static_cast<std::int64_t>(acc);
  return d.negative ? -v : v;
}

}  // namespace detail

/// Encodes one raw field under finalized column metadata. In append mode an
/// unseen categorical value receives the next dense code.
inline std::int64_t encode_value(std::string_view raw, ColumnMeta& meta,
                                 EncodeMode mode = EncodeMode::read_only) {
  raw = detail::trim(raw);
  if (detail::is_null_token(raw)) return kNullValue;
  switch (meta.kind) {
    case ColumnKind::integer: {
      auto v = detail::parse_int(raw);
      if (!v) throw Error("column '" + meta.name + "': not an integer: '" + std::string(raw) + "'");
      return *v;
    }
    case ColumnKind::scaled_float: {
      auto d = detail::parse_decimal(raw);
      if (!d) throw Error("column '" + meta.name + "': not a decimal: '" + std::string(raw) + "'");
      auto v = detail::scale_decimal(*d, meta.exponent, &meta.truncated);
      if (!v) throw Error("column '" + meta.name + "': value overflows int64: '" + std::string(raw) + "'");
      return *v;
    }
    case ColumnKind::categorical: {
      if (auto it = meta.dictionary.find(raw); it != meta.dictionary.end()) return it->second;
      if (mode == EncodeMode::read_only)
        throw Error("column '" + meta.name + "': unseen categorical value '" + std::string(raw) + "'");
      auto code = static_cast<std::int64_t>(meta.dictionary.size());
      meta.dictionary.emplace(std::string(raw), code);
      return code;
    }
  }
  return kNullValue;
}

inline std::int64_t encode_value(std::string_view raw, const ColumnMeta& meta) {
  ColumnMeta copy = meta;
  return encode_value(raw, copy, EncodeMode::read_only);
}

/// One row with its clustered key; values are ordered like the table columns.
struct Record {
  ClusteredKey key = 0;
  std::vector<std::int64_t> values;

  friend bool operator==(const Record&, const Record&) = default;
};

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<ColumnMeta> meta) : meta_(std::move(meta)), columns_(meta_.size()) {}

  /// Builds a table from whole columns; rows are sorted by key. Keys must be unique.
  static Table from_columns(std::vector<ColumnMeta> meta,
                            std::vector<std::vector<std::int64_t>> columns,
                            std::vector<ClusteredKey> keys) {
    if (meta.size() != columns.size()) throw Error("column metadata and data disagree");
    for (const auto& c : columns)
      if (c.size() != keys.size()) throw Error("column length differs from key count");
    Table t(std::move(meta));
    t.keys_ = std::move(keys);
    t.columns_ = std::move(columns);
    if (!std::is_sorted(t.keys_.begin(), t.keys_.end())) {
      std::vector<RowId> order(t.keys_.size());
      for (RowId i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](RowId a, RowId b) { return t.keys_[a] < t.keys_[b]; });
      t.permute(order);
    }
    std::vector<ClusteredKey> dups;
    for (std::size_t i = 1; i < t.keys_.size(); ++i)
      if (t.keys_[i] == t.keys_[i - 1]) dups.push_back(t.keys_[i]);
    if (!dups.empty()) throw DuplicateKeyError(std::move(dups));
    return t;
  }

  /// Builds a table whose keys are row ordinals 0..N-1.
  static Table with_ordinal_keys(std::vector<ColumnMeta> meta,
                                 std::vector<std::vector<std::int64_t>> columns) {
    std::size_t n = columns.empty() ? 0 : columns.front().size();
    std::vector<ClusteredKey> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = i;
    return from_columns(std::move(meta), std::move(columns), std::move(keys));
  }

  std::size_t row_count() const { return keys_.size(); }
  std::size_t column_count() const { return meta_.size(); }
  bool empty() const { return keys_.empty(); }

  const ColumnMeta& meta(std::size_t c) const { return meta_.at(c); }
  ColumnMeta& mutable_meta(std::size_t c) { return meta_.at(c); }
  const std::vector<ColumnMeta>& metas() const { return meta_; }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t c = 0; c < meta_.size(); ++c)
      if (meta_[c].name == name) return c;
    return std::nullopt;
  }

  std::size_t column_index(std::string_view name) const {
    if (auto c = find_column(name)) return *c;
    throw Error("unknown column '" + std::string(name) + "'");
  }

  std::span<const std::int64_t> column(std::size_t c) const { return columns_.at(c); }
  std::span<const ClusteredKey> keys() const { return keys_; }
  std::int64_t value(std::size_t c, RowId r) const { return columns_[c][r]; }
  ClusteredKey key(RowId r) const { return keys_[r]; }

  Record row(RowId r) const {
    Record rec{keys_.at(r), {}};
    rec.values.reserve(columns_.size());
    for (const auto& col : columns_) rec.values.push_back(col[r]);
    return rec;
  }

  std::optional<RowId> find(ClusteredKey key) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return std::nullopt;
    return static_cast<RowId>(it - keys_.begin());
  }

  /// Row positions [first, last) whose keys fall in the key range.
  std::pair<RowId, RowId> rows_in(KeyRange range) const {
    if (range.empty()) return {0, 0};
    auto lo = std::lower_bound(keys_.begin(), keys_.end(), range.lo);
    auto hi = std::lower_bound(lo, keys_.end(), range.hi);
    return {static_cast<RowId>(lo - keys_.begin()), static_cast<RowId>(hi - keys_.begin())};
  }

  /// Inserts records, keeping rows sorted. All-or-nothing: any key already
  /// present (or repeated in the batch) rejects the whole batch.
  std::vector<ClusteredKey> append(std::vector<Record> records) {
    for (const auto& r : records)
      if (r.values.size() != columns_.size()) throw Error("record arity does not match table");
    std::sort(records.begin(), records.end(),
              [](const Record& a, const Record& b) { return a.key < b.key; });
    std::vector<ClusteredKey> dups;
    for (std::size_t i = 0; i < records.size(); ++i) {
      bool repeated = i > 0 && records[i].key == records[i - 1].key;
      if (repeated || find(records[i].key)) dups.push_back(records[i].key);
    }
    if (!dups.empty()) throw DuplicateKeyError(std::move(dups));
    if (records.empty()) return {};

    const std::size_t n = keys_.size();
    const std::size_t total = n + records.size();
    std::vector<ClusteredKey> keys;
    keys.reserve(total);
    std::vector<std::size_t> source;  // < n: old row, >= n: record index + n
    source.reserve(total);
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < n || j < records.size()) {
      if (j == records.size() || (i < n && keys_[i] < records[j].key)) {
        keys.push_back(keys_[i]);
        source.push_back(i++);
      } else {
        keys.push_back(records[j].key);
        source.push_back(n + j++);
      }
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      std::vector<std::int64_t> merged(total);
      for (std::size_t r = 0; r < total; ++r)
        merged[r] = source[r] < n ? columns_[c][source[r]] : records[source[r] - n].values[c];
      columns_[c] = std::move(merged);
    }
    keys_ = std::move(keys);
    std::vector<ClusteredKey> accepted;
    accepted.reserve(records.size());
    for (const auto& r : records) accepted.push_back(r.key);
    return accepted;
  }

  /// Removes rows by key; all keys must exist or nothing is removed.
  std::vector<Record> erase(std::span<const ClusteredKey> keys) {
    std::vector<RowId> rows;
    rows.reserve(keys.size());
    std::vector<ClusteredKey> missing;
    for (auto k : keys) {
      if (auto r = find(k)) rows.push_back(*r);
      else missing.push_back(k);
    }
    if (!missing.empty()) throw MissingKeyError(std::move(missing));
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    std::vector<Record> removed;
    removed.reserve(rows.size());
    for (auto r : rows) removed.push_back(row(r));

    std::vector<bool> drop(keys_.size(), false);
    for (auto r : rows) drop[r] = true;
    auto compact = [&](auto& vec) {
      std::size_t w = 0;
      for (std::size_t r = 0; r < vec.size(); ++r)
        if (!drop[r]) vec[w++] = vec[r];
      vec.resize(w);
    };
    compact(keys_);
    for (auto& col : columns_) compact(col);
    return removed;
  }

  /// Moves rows to new keys. Each pair is (current key, new key).
  void rekey(const std::vector<std::pair<ClusteredKey, ClusteredKey>>& moves) {
    if (moves.empty()) return;
    std::vector<ClusteredKey> old_keys;
    old_keys.reserve(moves.size());
    for (const auto& m : moves) old_keys.push_back(m.first);
    std::map<ClusteredKey, ClusteredKey> target(moves.begin(), moves.end());
    auto removed = erase(old_keys);
    for (auto& rec : removed) rec.key = target.at(rec.key);
    append(std::move(removed));
  }

  /// Replaces every row's key (indexed by current row position) and re-sorts.
  void assign_keys(const std::vector<ClusteredKey>& new_keys) {
    if (new_keys.size() != keys_.size()) throw Error("assign_keys: size mismatch");
    keys_ = new_keys;
    std::vector<RowId> order(keys_.size());
    for (RowId i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](RowId a, RowId b) { return keys_[a] < keys_[b]; });
    permute(order);
    for (std::size_t i = 1; i < keys_.size(); ++i)
      if (keys_[i] == keys_[i - 1]) throw DuplicateKeyError({keys_[i]});
  }

  /// Throws if column lengths or key ordering are inconsistent.
  void check_invariants() const {
    for (const auto& c : columns_)
      if (c.size() != keys_.size()) throw Error("column length differs from row count");
    for (std::size_t i = 1; i < keys_.size(); ++i)
      if (keys_[i - 1] >= keys_[i]) throw Error("clustered keys not strictly increasing");
  }

 private:
  void permute(const std::vector<RowId>& order) {
    auto apply = [&](auto& vec) {
      std::remove_reference_t<decltype(vec)> out(vec.size());
      for (std::size_t i = 0; i < order.size(); ++i) out[i] = vec[order[i]];
      vec = std::move(out);
    };
    apply(keys_);
    for (auto& c : columns_) apply(c);
  }

  std::vector<ColumnMeta> meta_;
  std::vector<std::vector<std::int64_t>> columns_;
  std::vector<ClusteredKey> keys_;
};

struct ScanResult {
  std::vector<RowId> rows;
  /// Rows whose key lies in the scanned range, before the predicate.
  std::size_t records_touched = 0;
};

/// Sequential scan of row positions [first, last); calls sink(row) for each
/// row passing pred(row). Returns the number of rows visited.
template <class Pred, class Sink>
std::size_t scan_rows(RowId first, RowId last, Pred&& pred, Sink&& sink) {
  for (RowId r = first; r < last; ++r)
    if (pred(r)) sink(r);
  return last > first ? last - first : 0;
}

template <class Pred>
ScanResult range_scan(const Table& table, KeyRange range, Pred&& pred) {
  ScanResult out;
  auto [first, last] = table.rows_in(range);
  out.records_touched = scan_rows(first, last, pred, [&](RowId r) { out.rows.push_back(r); });
  return out;
}

inline ScanResult range_scan(const Table& table, KeyRange range) {
  return range_scan(table, range, [](RowId) { return true; });
}

inline std::optional<Record> point_lookup(const Table& table, ClusteredKey key) {
  if (auto r = table.find(key)) return table.row(*r);
  return std::nullopt;
}

inline std::vector<ClusteredKey> append(Table& table, std::vector<Record> records) {
  return table.append(std::move(records));
}

// ---------------------------------------------------------------------------
// Bit-packed compression blocks

inline constexpr std::size_t kBlockLength = 1024;

/// A run of values stored as fixed-width offsets from the run minimum.
struct CompressionBlock {
  std::int64_t base = 0;
  std::uint8_t width = 0;
  std::uint32_t len = 0;
  std::vector<std::uint64_t> words;

  std::uint64_t offset(std::size_t i) const {
    if (width == 0) return 0;
    const std::size_t bit = i * width;
    const std::size_t w = bit / 64;
    const std::size_t shift = bit % 64;
    std::uint64_t v = words[w] >> shift;
    if (shift + width > 64) v |= words[w + 1] << (64 - shift);
    return width == 64 ? v : v & ((std::uint64_t{1} << width) - 1);
  }

  std::int64_t get(std::size_t i) const {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(base) + offset(i));
  }

  static std::size_t words_for(std::size_t len, unsigned width) {
    return (len * width + 63) / 64;
  }
};

inline CompressionBlock encode_block(std::span<const std::int64_t> values) {
  CompressionBlock b;
  b.len = static_cast<std::uint32_t>(values.size());
  if (values.empty()) return b;
  b.base = *std::min_element(values.begin(), values.end());
  std::uint64_t max_off = 0;
  for (auto v : values)
    max_off = std::max(max_off, static_cast<std::uint64_t>(v) - static_cast<std::uint64_t>(b.base));
  b.width = static_cast<std::uint8_t>(std::bit_width(max_off));
  b.words.assign(CompressionBlock::words_for(values.size(), b.width), 0);
  if (b.width == 0) return b;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t off = static_cast<std::uint64_t>(values[i]) - static_cast<std::uint64_t>(b.base);
    const std::size_t bit = i * b.width;
    const std::size_t w = bit / 64;
    const std::size_t shift = bit % 64;
    b.words[w] |= off << shift;
    if (shift + b.width > 64) b.words[w + 1] |= off >> (64 - shift);
  }
  return b;
}

inline std::vector<std::int64_t> decode_block(const CompressionBlock& b) {
  std::vector<std::int64_t> out(b.len);
  for (std::size_t i = 0; i < b.len; ++i) out[i] = b.get(i);
  return out;
}

/// A column split into kBlockLength-record compression blocks.
class CompressedColumn {
 public:
  CompressedColumn() = default;
  explicit CompressedColumn(std::span<const std::int64_t> values, std::size_t block_len = kBlockLength)
      : block_len_(block_len), size_(values.size()) {
    for (std::size_t i = 0; i < values.size(); i += block_len_)
      blocks_.push_back(encode_block(values.subspan(i, std::min(block_len_, values.size() - i))));
  }

  static CompressedColumn from_blocks(std::vector<CompressionBlock> blocks, std::size_t block_len = kBlockLength) {
    CompressedColumn c;
    c.block_len_ = block_len;
    for (const auto& b : blocks) c.size_ += b.len;
    c.blocks_ = std::move(blocks);
    return c;
  }

  std::size_t size() const { return size_; }
  std::int64_t get(std::size_t i) const { return blocks_[i / block_len_].get(i % block_len_); }
  const std::vector<CompressionBlock>& blocks() const { return blocks_; }

  std::vector<std::int64_t> decode() const {
    std::vector<std::int64_t> out;
    out.reserve(size_);
    for (const auto& b : blocks_)
      for (std::size_t i = 0; i < b.len; ++i) out.push_back(b.get(i));
    return out;
  }

  std::size_t packed_bytes() const {
    std::size_t bytes = 0;
    for (const auto& b : blocks_) bytes += b.words.size() * 8 + sizeof(std::int64_t) + 5;
    return bytes;
  }

 private:
  std::size_t block_len_ = kBlockLength;
  std::size_t size_ = 0;
  std::vector<CompressionBlock> blocks_;
};

}  // namespace cortex
