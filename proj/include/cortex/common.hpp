#pragma once
// Shared vocabulary types and error classes for the correlation index.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cortex {

/// Unique per-record key. The high bits name the host bucket, the low
/// bits are an intra-bucket counter, so a bucket owns one contiguous range.
using ClusteredKey = std::uint64_t;
using HostBucketId = std::uint32_t;
using TargetBucketId = std::uint32_t;
/// Physical row position inside a Table.
using RowId = std::size_t;

inline constexpr int kCounterBits = 24;
inline constexpr int kBucketBits = 40;
inline constexpr std::uint64_t kCounterLimit = std::uint64_t{1} << kCounterBits;
inline constexpr std::uint64_t kMaxBucketId = (std::uint64_t{1} << 32) - 1;

inline constexpr std::int64_t kNullValue = std::numeric_limits<std::int64_t>::min() + 1;
inline constexpr std::int64_t kMinValue = std::numeric_limits<std::int64_t>::min();
inline constexpr std::int64_t kMaxValue = std::numeric_limits<std::int64_t>::max();

constexpr ClusteredKey make_key(HostBucketId bucket, std::uint64_t counter) {
  return (static_cast<ClusteredKey>(bucket) << kCounterBits) | counter;
}

constexpr HostBucketId bucket_of(ClusteredKey key) {
  return static_cast<HostBucketId>(key >> kCounterBits);
}

/// Half-open interval of clustered keys.
struct KeyRange {
  ClusteredKey lo = 0;
  ClusteredKey hi = 0;

  bool empty() const { return lo >= hi; }
  bool contains(ClusteredKey k) const { return lo <= k && k < hi; }
  friend bool operator==(const KeyRange&, const KeyRange&) = default;
};

constexpr KeyRange key_range_of(HostBucketId bucket) {
  return {make_key(bucket, 0), make_key(bucket, 0) + kCounterLimit};
}

/// Half-open interval of encoded column values.
struct ValueRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool empty() const { return lo >= hi; }
  bool contains(std::int64_t v) const { return lo <= v && v < hi; }
  bool intersects(const ValueRange& o) const {
    return !empty() && !o.empty() && lo < o.hi && o.lo < hi;
  }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

constexpr ValueRange unbounded_range() { return {kMinValue, kMaxValue}; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string msg, std::size_t row, std::string column)
      : Error(std::move(msg)), row_(row), column_(std::move(column)) {}
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class DuplicateKeyError : public Error {
 public:
  explicit DuplicateKeyError(std::vector<ClusteredKey> keys)
      : Error(describe("duplicate clustered keys", keys)), keys_(std::move(keys)) {}
  const std::vector<ClusteredKey>& keys() const { return keys_; }

  static std::string describe(const char* what, const std::vector<ClusteredKey>& keys) {
    std::string msg = what;
    msg += ":";
    std::size_t shown = 0;
    for (auto k : keys) {
      if (shown++ == 16) {
        msg += " ...";
        break;
      }
      msg += " " + std::to_string(k);
    }
    return msg;
  }

 private:
  std::vector<ClusteredKey> keys_;
};

class MissingKeyError : public Error {
 public:
  explicit MissingKeyError(std::vector<ClusteredKey> keys)
      : Error(DuplicateKeyError::describe("unknown clustered keys", keys)),
        keys_(std::move(keys)) {}
  const std::vector<ClusteredKey>& keys() const { return keys_; }

 private:
  std::vector<ClusteredKey> keys_;
};

/// A query returned a different id set than the full-scan reference.
class ExactnessViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace cortex
