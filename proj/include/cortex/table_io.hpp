#pragma once
// CSV ingestion and the CTX1 columnar dump format (see docs/FORMAT.md).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cortex/column_store.hpp"

namespace cortex {

enum class KindHint { auto_detect, integer, scaled_float, categorical };

inline KindHint parse_kind_hint(std::string_view s) {
  if (s == "auto" || s.empty()) return KindHint::auto_detect;
  if (s == "int" || s == "integer") return KindHint::integer;
  if (s == "float" || s == "decimal" || s == "scaled_float") return KindHint::scaled_float;
  if (s == "cat" || s == "categorical" || s == "string") return KindHint::categorical;
  throw Error("unknown column kind '" + std::string(s) + "'");
}

struct ColumnSpec {
  std::string name;
  KindHint hint = KindHint::auto_detect;
};

struct IngestOptions {
  /// Columns to load; empty loads every header column with auto detection.
  std::vector<ColumnSpec> schema;
  /// Integer column supplying clustered keys; absent assigns row ordinals.
  std::optional<std::string> key_column;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

enum class FieldType { null, integer, decimal, text };

inline FieldType classify(std::string_view s) {
  if (is_null_token(s)) return FieldType::null;
  if (parse_int(s)) return FieldType::integer;
  if (parse_decimal(s)) return FieldType::decimal;
  return FieldType::text;
}

}  // namespace detail

inline Table ingest_csv(std::istream& in, const IngestOptions& opts = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV: missing header", 0, "");
  auto header_fields = detail::split_fields(line);
  std::vector<std::string> header(header_fields.begin(), header_fields.end());
  auto header_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError("column '" + name + "' not in CSV header", 0, name);
  };

  std::vector<ColumnSpec> schema = opts.schema;
  if (schema.empty()) {
    for (const auto& h : header)
      if (!opts.key_column || h != *opts.key_column) schema.push_back({h, KindHint::auto_detect});
  }
  std::vector<std::size_t> source;
  for (const auto& spec : schema) source.push_back(header_index(spec.name));
  std::optional<std::size_t> key_source;
  if (opts.key_column) key_source = header_index(*opts.key_column);

  // Raw fields are kept until every column's kind and scale are known.
  std::vector<std::vector<std::string>> raw(schema.size());
  std::vector<ClusteredKey> keys;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()),
                       row, "");
    for (std::size_t c = 0; c < schema.size(); ++c) raw[c].emplace_back(fields[source[c]]);
    if (key_source) {
      auto k = detail::parse_int(fields[*key_source]);
      if (!k || *k < 0)
        throw ParseError("row " + std::to_string(row) + ": key column '" + *opts.key_column +
                             "' must be a non-negative integer",
                         row, *opts.key_column);
      keys.push_back(static_cast<ClusteredKey>(*k));
    } else {
      keys.push_back(keys.size());
    }
  }

  std::vector<ColumnMeta> metas;
  std::vector<std::vector<std::int64_t>> columns;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& spec = schema[c];
    const auto& vals = raw[c];
    ColumnMeta meta;
    meta.name = spec.name;

    std::optional<std::size_t> first_numeric;
    std::optional<std::size_t> first_text;
    bool any_decimal = false;
    int digits = 0;
    for (std::size_t r = 0; r < vals.size(); ++r) {
      switch (detail::classify(vals[r])) {
        case detail::FieldType::null: break;
        case detail::FieldType::integer:
          if (!first_numeric) first_numeric = r;
          break;
        case detail::FieldType::decimal:
          if (!first_numeric) first_numeric = r;
          any_decimal = true;
          digits = std::max(digits, detail::parse_decimal(vals[r])->significant_fraction_digits());
          break;
        case detail::FieldType::text:
          if (!first_text) first_text = r;
          break;
      }
    }
    auto fail_at = [&](std::size_t r, const std::string& why) {
      throw ParseError("row " + std::to_string(r + 1) + ", column '" + spec.name + "': " + why,
                       r + 1, spec.name);
    };

    KindHint hint = spec.hint;
    if (hint == KindHint::auto_detect) {
      if (first_text && first_numeric)
        fail_at(std::max(*first_text, *first_numeric), "mixed numeric and text values");
      hint = first_text ? KindHint::categorical
                        : (any_decimal ? KindHint::scaled_float : KindHint::integer);
    }
    switch (hint) {
      case KindHint::integer:
        meta.kind = ColumnKind::integer;
        if (first_text) fail_at(*first_text, "expected integer, got '" + vals[*first_text] + "'");
        if (any_decimal) {
          for (std::size_t r = 0; r < vals.size(); ++r)
            if (detail::classify(vals[r]) == detail::FieldType::decimal)
              fail_at(r, "expected integer, got '" + vals[r] + "'");
        }
        break;
      case KindHint::scaled_float:
        meta.kind = ColumnKind::scaled_float;
        if (first_text) fail_at(*first_text, "expected decimal, got '" + vals[*first_text] + "'");
        meta.exponent = std::min(digits, kMaxScaleExponent);
        meta.truncated = digits > kMaxScaleExponent;
        break;
      default:
        meta.kind = ColumnKind::categorical;
        {
          // Codes follow sorted order of the distinct raw values.
          std::vector<std::string> distinct;
          for (const auto& v : vals)
            if (!detail::is_null_token(v)) distinct.push_back(v);
          std::sort(distinct.begin(), distinct.end());
          distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
          for (std::size_t i = 0; i < distinct.size(); ++i)
            meta.dictionary.emplace(distinct[i], static_cast<std::int64_t>(i));
        }
        break;
    }

    std::vector<std::int64_t> encoded;
    encoded.reserve(vals.size());
    for (std::size_t r = 0; r < vals.size(); ++r) {
      try {
        encoded.push_back(encode_value(vals[r], meta, EncodeMode::read_only));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        fail_at(r, e.what());
      }
    }
    metas.push_back(std::move(meta));
    columns.push_back(std::move(encoded));
  }
  return Table::from_columns(std::move(metas), std::move(columns), std::move(keys));
}

inline Table ingest_csv(const std::string& path, const IngestOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV file '" + path + "'");
  return ingest_csv(in, opts);
}

/// Writes the table as CSV with encoded integer values and a leading key column.
inline void write_csv(std::ostream& out, const Table& table, bool with_key = true) {
  if (with_key) out << "key";
  for (std::size_t c = 0; c < table.column_count(); ++c)
    out << ((c > 0 || with_key) ? "," : "") << table.meta(c).name;
  out << '\n';
  for (RowId r = 0; r < table.row_count(); ++r) {
    if (with_key) out << table.key(r);
    for (std::size_t c = 0; c < table.column_count(); ++c)
      out << ((c > 0 || with_key) ? "," : "") << table.value(c, r);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// CTX1 binary dump

inline constexpr char kTableMagic[4] = {'C', 'T', 'X', '1'};
inline constexpr std::uint32_t kTableFormatVersion = 1;

namespace detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}
  template <class T>
  void put(T v) {
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    out_.write(buf, sizeof(T));
  }
  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  std::ostream& out_;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}
  template <class T>
  T get() {
    unsigned char buf[sizeof(T)];
    if (!in_.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("CTX1: truncated input");
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
    return static_cast<T>(u);
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    if (n > 0 && !in_.read(s.data(), static_cast<std::streamsize>(n))) throw Error("CTX1: truncated input");
    return s;
  }

 private:
  std::istream& in_;
};

inline void write_blocks(LeWriter& w, const CompressedColumn& col) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(col.blocks().size()));
  for (const auto& b : col.blocks()) {
    w.put<std::int64_t>(b.base);
    w.put<std::uint8_t>(b.width);
    w.put<std::uint32_t>(b.len);
    for (auto word : b.words) w.put<std::uint64_t>(word);
  }
}

inline std::vector<std::int64_t> read_blocks(LeReader& r, std::size_t expected_rows) {
  auto count = r.get<std::uint32_t>();
  std::vector<CompressionBlock> blocks(count);
  for (auto& b : blocks) {
    b.base = r.get<std::int64_t>();
    b.width = r.get<std::uint8_t>();
    b.len = r.get<std::uint32_t>();
    if (b.width > 64) throw Error("CTX1: invalid block width");
    b.words.resize(CompressionBlock::words_for(b.len, b.width));
    for (auto& word : b.words) word = r.get<std::uint64_t>();
  }
  auto values = CompressedColumn::from_blocks(std::move(blocks)).decode();
  if (values.size() != expected_rows) throw Error("CTX1: column length mismatch");
  return values;
}

}  // namespace detail

inline void write_table(std::ostream& out, const Table& table) {
  detail::LeWriter w(out);
  w.bytes(std::string_view(kTableMagic, 4));
  w.put<std::uint32_t>(kTableFormatVersion);
  w.put<std::uint64_t>(table.row_count());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.column_count()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kBlockLength));

  std::vector<std::int64_t> keys(table.keys().begin(), table.keys().end());
  detail::write_blocks(w, CompressedColumn(keys));
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const auto& m = table.meta(c);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(m.name.size()));
    w.bytes(m.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
    w.put<std::int8_t>(static_cast<std::int8_t>(m.exponent));
    w.put<std::uint8_t>(m.truncated ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.dictionary.size()));
    for (const auto& [raw, code] : m.dictionary) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(raw.size()));
      w.bytes(raw);
      w.put<std::int64_t>(code);
    }
    detail::write_blocks(w, CompressedColumn(table.column(c)));
  }
  if (!out) throw Error("CTX1: write failed");
}

inline Table read_table(std::istream& in) {
  detail::LeReader r(in);
  if (r.bytes(4) != std::string_view(kTableMagic, 4)) throw Error("CTX1: bad magic");
  if (auto v = r.get<std::uint32_t>(); v != kTableFormatVersion)
    throw Error("CTX1: unsupported version " + std::to_string(v));
  auto rows = r.get<std::uint64_t>();
  auto ncols = r.get<std::uint32_t>();
  if (auto bl = r.get<std::uint32_t>(); bl != kBlockLength) throw Error("CTX1: unsupported block length");

  auto raw_keys = detail::read_blocks(r, rows);
  std::vector<ClusteredKey> keys(raw_keys.begin(), raw_keys.end());
  std::vector<ColumnMeta> metas;
  std::vector<std::vector<std::int64_t>> columns;
  for (std::uint32_t c = 0; c < ncols; ++c) {
    ColumnMeta m;
    m.name = r.bytes(r.get<std::uint16_t>());
    auto kind = r.get<std::uint8_t>();
    if (kind > 2) throw Error("CTX1: bad column kind");
    m.kind = static_cast<ColumnKind>(kind);
    m.exponent = r.get<std::int8_t>();
    m.truncated = r.get<std::uint8_t>() != 0;
    auto dict = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < dict; ++i) {
      auto raw = r.bytes(r.get<std::uint32_t>());
      m.dictionary.emplace(std::move(raw), r.get<std::int64_t>());
    }
    metas.push_back(std::move(m));
    columns.push_back(detail::read_blocks(r, rows));
  }
  return Table::from_columns(std::move(metas), std::move(columns), std::move(keys));
}

inline void save_table(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_table(out, table);
}

inline Table load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_table(in);
}

}  // namespace cortex
