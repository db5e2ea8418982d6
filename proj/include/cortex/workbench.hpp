#pragma once
// Benchmark workbench: synthetic correlated data, selectivity-targeted
// workloads, beta calibration, the benchmark runner and JSON exports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cortex/column_store.hpp"
#include "cortex/host_index.hpp"
#include "cortex/index.hpp"
#include "cortex/query_engine.hpp"
#include "cortex/stashing.hpp"
#include "cortex/table_io.hpp"
#include "cortex/update_tracker.hpp"

namespace cortex {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  std::size_t rows = 100000;
  std::int64_t domain_lo = 0;
  std::int64_t domain_hi = 1000000;
  /// Fraction f of rows receiving noise.
  double noise_fraction = 0.2;
  /// Laplace scale of the additive noise, in value units.
  double noise_scale = 200000;
  std::uint64_t seed = 42;
  /// Extra independent uniform columns z0, z1, ... (e.g. for an octree host).
  std::size_t aux_columns = 0;
};

/// Columns x (host) and y (target), then aux columns. y = x except on exactly
/// round(f * rows) rows, where y = clamp(x + Laplace noise).
inline Table gen_synthetic(const SyntheticSpec& spec) {
  if (!(spec.noise_fraction >= 0 && spec.noise_fraction <= 1)) throw Error("noise_fraction must lie in [0, 1]");
  if (spec.noise_scale < 0) throw Error("noise_scale must be >= 0");
  if (spec.domain_lo > spec.domain_hi) throw Error("empty value domain");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::int64_t> uni(spec.domain_lo, spec.domain_hi);
  const auto n = spec.rows;
  std::vector<std::int64_t> x(n);
  for (auto& v : x) v = uni(rng);
  std::vector<std::int64_t> y = x;

  const auto noisy = static_cast<std::size_t>(std::llround(spec.noise_fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  if (spec.noise_scale > 0) {
    // Difference of two exponentials with mean b is Laplace(0, b).
    std::exponential_distribution<double> expo(1.0 / spec.noise_scale);
    for (std::size_t i = 0; i < noisy; ++i) {
      auto r = idx[i];
      double noise = expo(rng) - expo(rng);
      double v = static_cast<double>(x[r]) + std::round(noise);
      y[r] = static_cast<std::int64_t>(
          std::clamp(v, static_cast<double>(spec.domain_lo), static_cast<double>(spec.domain_hi)));
    }
  }

  std::vector<ColumnMeta> metas{ColumnMeta::integer("x"), ColumnMeta::integer("y")};
  std::vector<std::vector<std::int64_t>> cols{std::move(x), std::move(y)};
  for (std::size_t a = 0; a < spec.aux_columns; ++a) {
    metas.push_back(ColumnMeta::integer("z" + std::to_string(a)));
    std::vector<std::int64_t> z(n);
    for (auto& v : z) v = uni(rng);
    cols.push_back(std::move(z));
  }
  return Table::with_ordinal_keys(std::move(metas), std::move(cols));
}

// ---------------------------------------------------------------------------
// Workloads

struct WorkloadSpec {
  std::string column;
  double selectivity = 0.001;
  std::size_t count = 100;
  std::uint64_t seed = 42;
};

struct Workload {
  std::vector<RangeQuery> queries;
  /// True selectivity of each query.
  std::vector<double> selectivities;

  double mean_selectivity() const {
    if (selectivities.empty()) return 0;
    return std::accumulate(selectivities.begin(), selectivities.end(), 0.0) /
           static_cast<double>(selectivities.size());
  }
};

/// Draws range queries over one column with a true selectivity in [s/2, 2s].
/// Centers are uniform over the value range; each width is tuned by binary
/// search on the sorted column.
class WorkloadGenerator {
 public:
  static constexpr int kMaxAttempts = 200;

  WorkloadGenerator(const Table& table, std::string column, std::uint64_t seed)
      : column_(std::move(column)), rng_(seed) {
    auto v = table.column(table.column_index(column_));
    sorted_.assign(v.begin(), v.end());
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t count_in(ValueRange r) const {
    if (r.empty()) return 0;
    return static_cast<std::size_t>(std::lower_bound(sorted_.begin(), sorted_.end(), r.hi) -
                                    std::lower_bound(sorted_.begin(), sorted_.end(), r.lo));
  }

  /// One query and its true selectivity.
  std::pair<RangeQuery, double> next(double s) {
    if (!(s > 0)) throw Error("selectivity must lie in (0, 1]");
    if (sorted_.empty()) throw Error("cannot generate queries over an empty column");
    const double n = static_cast<double>(sorted_.size());
    const std::int64_t lo = sorted_.front();
    const std::int64_t hi = sorted_.back();
    if (s >= 1) {
      ValueRange full{lo, hi == kMaxValue ? kMaxValue : hi + 1};
      return {{column_, full}, static_cast<double>(count_in(full)) / n};
    }
    const double min_count = std::max(1.0, std::ceil(s / 2 * n));
    const double max_count = 2 * s * n;
    const double want = std::max(1.0, s * n);
    std::uniform_int_distribution<std::int64_t> center_dist(lo, hi);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const std::int64_t c = center_dist(rng_);
      auto range_for = [&](std::uint64_t w) {
        auto a = static_cast<std::int64_t>(std::max<__int128>(static_cast<__int128>(c) - w, kMinValue));
        auto b = static_cast<std::int64_t>(std::min<__int128>(static_cast<__int128>(c) + w + 1, kMaxValue));
        return ValueRange{a, b};
      };
      // Smallest half-width reaching the wanted count.
      std::uint64_t wlo = 0;
      std::uint64_t whi = static_cast<std::uint64_t>(hi - lo) + 1;
      while (wlo < whi) {
        auto mid = wlo + (whi - wlo) / 2;
        if (static_cast<double>(count_in(range_for(mid))) >= want) whi = mid;
        else wlo = mid + 1;
      }
      auto r = range_for(wlo);
      auto got = static_cast<double>(count_in(r));
      if (got >= min_count && got <= max_count) return {{column_, r}, got / n};
    }
    throw Error("could not reach selectivity " + std::to_string(s) + " on column '" + column_ + "' after " +
                std::to_string(kMaxAttempts) + " attempts");
  }

 private:
  std::string column_;
  std::vector<std::int64_t> sorted_;
  std::mt19937_64 rng_;
};

inline Workload gen_workload(const Table& table, const WorkloadSpec& spec) {
  if (!(spec.selectivity > 0 && spec.selectivity <= 1)) throw Error("selectivity must lie in (0, 1]");
  WorkloadGenerator gen(table, spec.column, spec.seed);
  Workload w;
  for (std::size_t i = 0; i < spec.count; ++i) {
    auto [q, s] = gen.next(spec.selectivity);
    w.queries.push_back(std::move(q));
    w.selectivities.push_back(s);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
  std::size_t queries = 1000;
  std::uint64_t seed = 42;
  std::size_t warmups = 3;
  double min_selectivity = 0.0001;
  double max_selectivity = 0.05;
  /// When set, timings come from this model instead of the clock.
  struct Injected {
    double c1 = 5;
    double c2 = 50;
    double c3 = 10;
    double noise = 0.05;
  };
  std::optional<Injected> injected;
};

/// Runs a mix of hybrid, lookup-only (secondary index) and scan-only
/// (Correlation Map) plans over log-uniform selectivities so that scanned
/// records and point lookups vary independently, then fits the timing model.
inline CalibrationFit calibrate_index(const CortexIndex& index, const std::string& column,
                                      const CalibrationOptions& opt) {
  if (opt.queries < 3) throw Error("calibration needs at least 3 queries");
  const auto& table = index.table();
  WorkloadGenerator gen(table, column, opt.seed);
  auto sec = SecondaryIndex::build(table, column);
  auto cm = CorrelationMapBaseline::from_index(index, column);
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> logs(std::log(opt.min_selectivity), std::log(opt.max_selectivity));
  std::optional<InjectedTiming> inj;
  if (opt.injected)
    inj.emplace(opt.injected->c1, opt.injected->c2, opt.injected->c3, opt.injected->noise, opt.seed + 1);

  std::vector<CalibrationSample> samples;
  samples.reserve(opt.queries);
  for (std::size_t i = 0; i < opt.queries; ++i) {
    auto q = gen.next(std::exp(logs(rng)));
    auto run = [&]() -> QueryResult {
      switch (i % 3) {
        case 0: return execute(index, q.first);
        case 1: return secondary_execute(sec, table, q.first);
        default: return cm_execute(cm, table, q.first);
      }
    };
    if (!inj)
      for (std::size_t w = 0; w < opt.warmups; ++w) run();
    auto res = run();
    CalibrationSample s;
    s.scanned = static_cast<double>(res.stats.range_records_touched);
    s.lookups = static_cast<double>(res.stats.point_lookups);
    s.elapsed_ns = inj ? (*inj)(s.scanned, s.lookups) : static_cast<double>(res.stats.elapsed_ns);
    samples.push_back(s);
  }
  return fit_timing_model(samples);
}

// ---------------------------------------------------------------------------
// JSON exports

inline json to_json(const ExecutionStats& s, bool timing = true) {
  json j{{"range_records_touched", s.range_records_touched},
         {"point_lookups", s.point_lookups},
         {"result_size", s.result_size},
         {"dedup_removed", s.dedup_removed}};
  if (timing) j["elapsed_ns"] = s.elapsed_ns;
  return j;
}

inline json to_json(const CalibrationFit& f) {
  return {{"c1", f.c1}, {"c2", f.c2}, {"c3", f.c3}, {"beta", f.beta}, {"r_squared", f.r_squared},
          {"samples", f.samples}};
}

inline json to_json(const ChangeReport& r) {
  return {{"inserted", r.inserted},
          {"deleted", r.deleted},
          {"stash_additions", r.stash_additions},
          {"stash_removals", r.stash_removals},
          {"cells_created", r.cells_created},
          {"cells_removed", r.cells_removed},
          {"cells_flipped_to_inlier", r.cells_flipped_to_inlier},
          {"cells_flipped_to_outlier", r.cells_flipped_to_outlier},
          {"target_splits", r.target_splits},
          {"host_splits", r.host_splits},
          {"host_merges", r.host_merges},
          {"clamped", r.clamped},
          {"notices", r.notices}};
}

inline json host_stats_json(const HostIndex& host, bool with_buckets = false) {
  std::size_t min_count = 0, max_count = 0, total = 0;
  auto buckets = host.buckets();
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    auto n = buckets[i].count;
    min_count = i == 0 ? n : std::min(min_count, n);
    max_count = std::max(max_count, n);
    total += n;
  }
  json j{{"variant", to_string(host.config().variant)},
         {"columns", host.config().columns},
         {"bucket_count", buckets.size()},
         {"records", total},
         {"min_bucket", min_count},
         {"max_bucket", max_count},
         {"split_threshold", host.split_threshold()},
         {"clamped_total", host.clamped_total()}};
  if (with_buckets) {
    json arr = json::array();
    for (const auto& b : buckets)
      arr.push_back({{"id", b.id}, {"key_lo", b.key_range.lo}, {"key_hi", b.key_range.hi}, {"count", b.count}});
    j["buckets"] = std::move(arr);
  }
  return j;
}

inline json assignment_json(const CortexIndex& index, const CorrelationState& c) {
  json buckets = json::array();
  for (TargetBucketId t = 0; t < c.buckets.size(); ++t) {
    auto b = c.buckets.bucket(t);
    buckets.push_back({{"id", t},
                       {"lo", b.value_range.lo},
                       {"hi", b.value_range.hi},
                       {"inlier_hosts", c.assignment.inlier_map[t]},
                       {"stash_size", c.assignment.stash[t].size()}});
  }
  auto sizes = index.sizes(c.column);
  return {{"column", c.column},
          {"target_buckets", c.buckets.size()},
          {"p0", c.p0},
          {"threshold", index.threshold(c)},
          {"cells", c.assignment.cell_count()},
          {"outlier_cells", c.assignment.outlier_cells()},
          {"stash_entries", sizes.stash_entries},
          {"inlier_map_entries", sizes.inlier_map_entries},
          {"bytes", sizes.bytes()},
          {"buckets", std::move(buckets)}};
}

// ---------------------------------------------------------------------------
// Benchmark runner

/// Seed from the CORTEX_SEED environment variable when set.
inline std::uint64_t resolve_seed(std::uint64_t fallback) {
  if (const char* env = std::getenv("CORTEX_SEED"); env && *env) {
    char* end = nullptr;
    auto v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw Error(std::string("CORTEX_SEED is not an unsigned integer: ") + env);
  }
  return fallback;
}

struct BenchConfig {
  std::uint64_t seed = 42;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::string> csv_path;
  IngestOptions csv;
  HostIndexConfig host = HostIndexConfig::clustered("x");
  std::vector<CorrelationConfig> correlations;
  std::vector<double> alphas{1.0};
  double beta = 17.88;
  std::optional<std::size_t> max_stash;
  std::vector<double> selectivities{0.001};
  std::size_t queries_per_selectivity = 100;
  std::vector<std::string> baselines{"full_scan", "secondary", "correlation_map", "cortex"};
  json echo;

  bool wants(const std::string& method) const {
    return std::find(baselines.begin(), baselines.end(), method) != baselines.end();
  }
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"full_scan", "secondary", "correlation_map", "cortex"};
  return m;
}

inline HostIndexConfig parse_host_config(const json& h) {
  auto variant = h.value("variant", std::string("clustered_1d"));
  auto cols = h.at("columns").get<std::vector<std::string>>();
  if (variant == "clustered_1d") {
    if (cols.size() != 1) throw Error("clustered_1d host takes exactly one column");
    return HostIndexConfig::clustered(cols[0], h.value("max_buckets", std::size_t{100000}));
  }
  if (variant == "octree") return HostIndexConfig::octree(cols, h.value("max_leaf", std::size_t{10000}));
  throw Error("unknown host variant '" + variant + "'");
}

inline SyntheticSpec parse_synthetic(const json& s, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.rows = s.value("rows", spec.rows);
  spec.noise_fraction = s.value("noise_fraction", spec.noise_fraction);
  spec.noise_scale = s.value("noise_scale", spec.noise_scale);
  spec.domain_lo = s.value("domain_lo", spec.domain_lo);
  spec.domain_hi = s.value("domain_hi", spec.domain_hi);
  spec.aux_columns = s.value("aux_columns", spec.aux_columns);
  spec.seed = seed;
  return spec;
}

/// Parses a bench config. Relative CSV paths resolve against base_dir.
inline BenchConfig parse_bench_config(const json& j, const std::filesystem::path& base_dir = {}) {
  BenchConfig cfg;
  cfg.echo = j;
  cfg.seed = resolve_seed(j.value("seed", std::uint64_t{42}));
  const auto& ds = j.at("dataset");
  if (ds.contains("synthetic")) {
    cfg.synthetic = parse_synthetic(ds.at("synthetic"), cfg.seed);
  } else if (ds.contains("csv")) {
    const auto& c = ds.at("csv");
    std::filesystem::path p = c.at("path").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    cfg.csv_path = p.string();
    if (c.contains("schema"))
      for (const auto& col : c.at("schema"))
        cfg.csv.schema.push_back({col.at("name").get<std::string>(), parse_kind_hint(col.value("kind", "auto"))});
    if (c.contains("key_column") && !c.at("key_column").is_null())
      cfg.csv.key_column = c.at("key_column").get<std::string>();
  } else {
    throw Error("dataset must be 'synthetic' or 'csv'");
  }
  cfg.host = parse_host_config(j.at("host"));
  for (const auto& c : j.at("correlations")) {
    CorrelationConfig cc;
    cc.target_column = c.at("target_column").get<std::string>();
    if (c.contains("target_buckets") && !c.at("target_buckets").is_null())
      cc.target_buckets = c.at("target_buckets").get<std::size_t>();
    if (c.contains("host_subset")) cc.host_subset = c.at("host_subset").get<std::vector<std::string>>();
    cfg.correlations.push_back(std::move(cc));
  }
  if (cfg.correlations.empty()) throw Error("bench config needs at least one correlation");
  if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
  cfg.beta = j.value("beta", cfg.beta);
  if (j.contains("max_stash") && !j.at("max_stash").is_null()) cfg.max_stash = j.at("max_stash").get<std::size_t>();
  if (j.contains("selectivities")) cfg.selectivities = j.at("selectivities").get<std::vector<double>>();
  cfg.queries_per_selectivity = j.value("queries_per_selectivity", cfg.queries_per_selectivity);
  if (j.contains("baselines")) cfg.baselines = j.at("baselines").get<std::vector<std::string>>();
  for (const auto& b : cfg.baselines)
    if (std::find(known_methods().begin(), known_methods().end(), b) == known_methods().end())
      throw Error("unknown baseline '" + b + "'");
  if (cfg.selectivities.empty()) throw Error("bench config needs at least one selectivity");
  if (cfg.alphas.empty()) throw Error("bench config needs at least one alpha");
  // Default N_t follows the narrowest workload.
  const double s_low = *std::min_element(cfg.selectivities.begin(), cfg.selectivities.end());
  for (auto& cc : cfg.correlations)
    if (!cc.target_buckets) cc.lowest_selectivity = s_low;
  return cfg;
}

inline BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_bench_config(j, std::filesystem::path(path).parent_path());
}

inline Table load_dataset(const BenchConfig& cfg) {
  if (cfg.synthetic) return gen_synthetic(*cfg.synthetic);
  if (cfg.csv_path) return ingest_csv(*cfg.csv_path, cfg.csv);
  throw Error("bench config has no dataset");
}

struct BenchRow {
  std::string method;
  std::optional<double> alpha;
  std::string column;
  double selectivity = 0;
  std::size_t queries = 0;
  double actual_selectivity = 0;
  double mean_elapsed_ns = 0;
  double median_elapsed_ns = 0;
  double mean_records_touched = 0;
  double mean_point_lookups = 0;
  double mean_result_size = 0;
  std::size_t index_bytes = 0;
  std::size_t stash_entries = 0;
};

struct BenchReport {
  json config;
  std::uint64_t seed = 0;
  std::size_t records = 0;
  json host;
  std::vector<BenchRow> rows;
  std::vector<json> indexes;

  json to_json(bool timing = true) const {
    json rs = json::array();
    for (const auto& r : rows) {
      json o{{"method", r.method},
             {"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
             {"column", r.column},
             {"selectivity", r.selectivity},
             {"queries", r.queries},
             {"actual_selectivity", r.actual_selectivity},
             {"mean_records_touched", r.mean_records_touched},
             {"mean_point_lookups", r.mean_point_lookups},
             {"mean_result_size", r.mean_result_size},
             {"index_bytes", r.index_bytes},
             {"stash_entries", r.stash_entries}};
      if (timing) {
        o["mean_elapsed_ns"] = r.mean_elapsed_ns;
        o["median_elapsed_ns"] = r.median_elapsed_ns;
      }
      rs.push_back(std::move(o));
    }
    return {{"config", config}, {"seed", seed},       {"records", records},
            {"host", host},     {"indexes", indexes}, {"rows", std::move(rs)}};
  }

  std::string to_csv(bool timing = true) const {
    auto num = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.9g", v);
      return std::string(buf);
    };
    std::ostringstream out;
    out << "method,alpha,column,selectivity,queries,actual_selectivity,mean_records_touched,mean_point_lookups,"
           "mean_result_size,index_bytes,stash_entries";
    if (timing) out << ",mean_elapsed_ns,median_elapsed_ns";
    out << '\n';
    for (const auto& r : rows) {
      out << r.method << ',' << (r.alpha ? num(*r.alpha) : "") << ',' << r.column << ',' << num(r.selectivity) << ','
          << r.queries << ',' << num(r.actual_selectivity) << ',' << num(r.mean_records_touched) << ','
          << num(r.mean_point_lookups) << ',' << num(r.mean_result_size) << ',' << r.index_bytes << ','
          << r.stash_entries;
      if (timing) out << ',' << num(r.mean_elapsed_ns) << ',' << num(r.median_elapsed_ns);
      out << '\n';
    }
    return out.str();
  }
};

namespace detail {

inline std::string describe_query(const RangeQuery& q) {
  return q.column + " in [" + std::to_string(q.range.lo) + ", " + std::to_string(q.range.hi) + ")";
}

/// Throws ExactnessViolation unless got equals want.
inline void check_exact(const std::string& method, const RangeQuery& q, const QueryResult& got,
                        const QueryResult& want) {
  if (got.ids == want.ids) return;
  std::vector<ClusteredKey> missing, extra;
  std::set_difference(want.ids.begin(), want.ids.end(), got.ids.begin(), got.ids.end(), std::back_inserter(missing));
  std::set_difference(got.ids.begin(), got.ids.end(), want.ids.begin(), want.ids.end(), std::back_inserter(extra));
  throw ExactnessViolation(method + " disagrees with full scan on " + describe_query(q) + ": " +
                           std::to_string(missing.size()) + " missing, " + std::to_string(extra.size()) + " extra");
}

template <class Run>
BenchRow measure(const std::string& method, const std::string& column, double s, const Workload& w,
                 const std::vector<QueryResult>& truth, Run&& run) {
  BenchRow row;
  row.method = method;
  row.column = column;
  row.selectivity = s;
  row.queries = w.queries.size();
  row.actual_selectivity = w.mean_selectivity();
  std::vector<double> times;
  double touched = 0, lookups = 0, results = 0;
  for (std::size_t i = 0; i < w.queries.size(); ++i) {
    auto res = run(w.queries[i]);
    check_exact(method, w.queries[i], res, truth[i]);
    times.push_back(static_cast<double>(res.stats.elapsed_ns));
    touched += static_cast<double>(res.stats.range_records_touched);
    lookups += static_cast<double>(res.stats.point_lookups);
    results += static_cast<double>(res.stats.result_size);
  }
  if (!times.empty()) {
    const double n = static_cast<double>(times.size());
    row.mean_elapsed_ns = std::accumulate(times.begin(), times.end(), 0.0) / n;
    auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
    std::nth_element(times.begin(), mid, times.end());
    row.median_elapsed_ns = *mid;
    row.mean_records_touched = touched / n;
    row.mean_point_lookups = lookups / n;
    row.mean_result_size = results / n;
  }
  return row;
}

}  // namespace detail

/// Builds every configuration once, runs each workload against each selected
/// method and checks every result against a full scan.
inline BenchReport run_bench(const BenchConfig& cfg) {
  BenchReport rep;
  rep.config = cfg.echo;
  rep.seed = cfg.seed;
  Table table = load_dataset(cfg);
  auto host = HostIndex::build(table, cfg.host);
  rep.records = table.row_count();
  rep.host = host_stats_json(host);

  for (std::size_t ci = 0; ci < cfg.correlations.size(); ++ci) {
    const auto& cc = cfg.correlations[ci];
    std::vector<Workload> workloads;
    std::vector<std::vector<QueryResult>> truth;
    for (std::size_t si = 0; si < cfg.selectivities.size(); ++si) {
      WorkloadSpec ws{cc.target_column, cfg.selectivities[si], cfg.queries_per_selectivity,
                      cfg.seed + 1000 * (ci + 1) + si};
      workloads.push_back(gen_workload(table, ws));
      std::vector<QueryResult> t;
      for (const auto& q : workloads.back().queries) t.push_back(full_scan(table, q));
      truth.push_back(std::move(t));
    }

    auto build_for = [&](double alpha) {
      StashPolicy policy;
      policy.alpha = alpha;
      policy.beta = cfg.beta;
      policy.max_stash = cfg.max_stash;
      return CortexIndex::build_on(table, host, {cc}, policy);
    };

    if (cfg.wants("full_scan"))
      for (std::size_t si = 0; si < workloads.size(); ++si)
        rep.rows.push_back(detail::measure("full_scan", cc.target_column, cfg.selectivities[si], workloads[si],
                                           truth[si], [&](const RangeQuery& q) { return full_scan(table, q); }));
    if (cfg.wants("secondary")) {
      auto sec = SecondaryIndex::build(table, cc.target_column);
      for (std::size_t si = 0; si < workloads.size(); ++si) {
        auto row = detail::measure("secondary", cc.target_column, cfg.selectivities[si], workloads[si], truth[si],
                                   [&](const RangeQuery& q) { return secondary_execute(sec, table, q); });
        row.index_bytes = sec.bytes();
        rep.rows.push_back(std::move(row));
      }
    }
    if (cfg.wants("correlation_map")) {
      auto cm = CorrelationMapBaseline::from_index(build_for(cfg.alphas.front()), cc.target_column);
      for (std::size_t si = 0; si < workloads.size(); ++si) {
        auto row = detail::measure("correlation_map", cc.target_column, cfg.selectivities[si], workloads[si],
                                   truth[si], [&](const RangeQuery& q) { return cm_execute(cm, table, q); });
        row.index_bytes = cm.bytes() + (cm.buckets().size() + 1) * IndexSizes::kEdgeBytes;
        rep.rows.push_back(std::move(row));
      }
    }
    if (cfg.wants("cortex")) {
      for (double alpha : cfg.alphas) {
        auto index = build_for(alpha);
        auto sizes = index.sizes(cc.target_column);
        json ij = assignment_json(index, index.correlation(cc.target_column));
        ij.erase("buckets");
        ij["alpha"] = alpha;
        rep.indexes.push_back(std::move(ij));
        for (std::size_t si = 0; si < workloads.size(); ++si) {
          auto row = detail::measure("cortex", cc.target_column, cfg.selectivities[si], workloads[si], truth[si],
                                     [&](const RangeQuery& q) { return execute(index, q); });
          row.alpha = alpha;
          row.index_bytes = sizes.bytes();
          row.stash_entries = sizes.stash_entries;
          rep.rows.push_back(std::move(row));
        }
      }
    }
  }
  return rep;
}

}  // namespace cortex
