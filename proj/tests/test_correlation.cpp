#include <gtest/gtest.h>

#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cortex/correlation.hpp"
#include "cortex/table_io.hpp"
#include "oracles.hpp"

namespace {

using namespace cortex;

Table xy_table(const std::vector<std::int64_t>& x, const std::vector<std::int64_t>& y) {
  return Table::with_ordinal_keys({ColumnMeta::integer("x"), ColumnMeta::integer("y")}, {x, y});
}

std::vector<std::size_t> populations(const TargetBuckets& b, const std::vector<std::int64_t>& v) {
  std::vector<std::size_t> pop(b.size(), 0);
  for (auto x : v) ++pop[oracle::target_of(b, x)];
  return pop;
}

struct Built {
  Table table;
  HostIndex host;
  TargetBuckets buckets;
  CellGrid grid;
};

Built build(Table t, const HostIndexConfig& cfg, std::size_t n_t) {
  auto host = HostIndex::build(t, cfg);
  auto col = t.column(1);
  auto buckets = build_target_buckets(col, n_t);
  auto grid = build_cell_grid(t, host, 1, buckets);
  return {std::move(t), std::move(host), std::move(buckets), std::move(grid)};
}

Built random_built(std::uint64_t seed, std::size_t n, std::size_t hosts, std::size_t n_t) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> d(0, 9999);
  std::normal_distribution<double> noise(0, 800);
  std::vector<std::int64_t> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = d(rng);
    y[i] = std::clamp<std::int64_t>(x[i] + static_cast<std::int64_t>(noise(rng)), 0, 9999);
  }
  return build(xy_table(x, y), HostIndexConfig::clustered("x", hosts), n_t);
}

Classification random_classes(std::mt19937_64& rng, std::size_t k) {
  std::bernoulli_distribution coin(0.3);
  Classification cls(k);
  for (auto& c : cls) c = coin(rng) ? CellClass::outlier : CellClass::inlier;
  return cls;
}

// ---------------------------------------------------------------------------
// Target buckets

TEST(TargetBuckets, EquiDepthOneToHundred) {
  std::vector<std::int64_t> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  auto b = build_target_buckets(v, 4);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(std::vector<std::int64_t>(b.lower_edges().begin(), b.lower_edges().end()),
            (std::vector<std::int64_t>{1, 26, 51, 76}));
  EXPECT_EQ(b.upper(), 101);
  for (auto p : populations(b, v)) EXPECT_EQ(p, 25u);
}

TEST(TargetBuckets, DuplicatesForceImbalance) {
  std::vector<std::int64_t> v(50, 500);
  for (int i = 0; i < 50; ++i) v.push_back(i * 3);
  auto b = build_target_buckets(v, 4);
  auto pop = populations(b, v);
  // Every copy of the repeated value lands in one bucket.
  EXPECT_GE(pop[b.locate(500)], 50u);
  std::size_t total = 0;
  for (auto p : pop) total += p;
  EXPECT_EQ(total, 100u);
}

TEST(TargetBuckets, CategoricalGetsOneBucketPerValue) {
  std::istringstream in("city\nNY\nLA\nSF\nNY\nLA\nNY\n");
  auto t = ingest_csv(in);
  ASSERT_EQ(t.meta(0).kind, ColumnKind::categorical);
  auto b = build_target_buckets(t.column(0), 10);
  ASSERT_EQ(b.size(), 3u);
  for (const auto& tb : b.buckets()) EXPECT_EQ(tb.value_range.hi - tb.value_range.lo, 1);
}

TEST(TargetBuckets, EmptyColumnAndZeroCountRejected) {
  EXPECT_THROW(build_target_buckets(std::vector<std::int64_t>{}, 4), Error);
  EXPECT_THROW(build_target_buckets(std::vector<std::int64_t>{1, 2}, 0), Error);
}

TEST(TargetBuckets, DistinctValuesDifferByAtMostOne) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(20, 2000)(rng);
    std::size_t n_t = std::uniform_int_distribution<std::size_t>(1, 19)(rng);
    std::vector<std::int64_t> v(n);
    std::iota(v.begin(), v.end(), -500);
    std::shuffle(v.begin(), v.end(), rng);
    auto b = build_target_buckets(v, n_t);
    ASSERT_EQ(b.size(), n_t);
    auto pop = populations(b, v);
    auto [lo, hi] = std::minmax_element(pop.begin(), pop.end());
    ASSERT_LE(*hi - *lo, 1u);
  }
}

TEST(TargetBuckets, LocateClampsAndMatchesLinearScan) {
  auto b = TargetBuckets::from_edges({0, 10, 25}, 40);
  EXPECT_EQ(b.locate(-100), 0u);
  EXPECT_EQ(b.locate(10), 1u);
  EXPECT_EQ(b.locate(9), 0u);
  EXPECT_EQ(b.locate(1000), 2u);
  for (std::int64_t v = -20; v < 60; ++v) ASSERT_EQ(b.locate(v), oracle::target_of(b, v));
  EXPECT_FALSE(b.intersecting({5, 5}).has_value());
  EXPECT_EQ(b.intersecting({5, 26}), std::make_pair(TargetBucketId{0}, TargetBucketId{2}));
}

TEST(TargetBuckets, SelectivityGivesCeilReciprocal) {
  EXPECT_EQ(target_buckets_for(0.001), 1000u);
  EXPECT_EQ(target_buckets_for(0.3), 4u);
  EXPECT_EQ(target_buckets_for(1.0), 1u);
  EXPECT_THROW(target_buckets_for(0), Error);
}

// ---------------------------------------------------------------------------
// Cell grid

TEST(CellGrid, PerfectCorrelationIsDiagonal) {
  std::vector<std::int64_t> x(200);
  std::iota(x.begin(), x.end(), 0);
  auto b = build(xy_table(x, x), HostIndexConfig::clustered("x", 10), 10);
  EXPECT_EQ(b.grid.cells.size(), 10u);
  for (const auto& c : b.grid.cells) EXPECT_EQ(c.count, 20u);
}

TEST(CellGrid, IndependentColumnsAreRoughlyUniform) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> d(0, 1'000'000);
  std::vector<std::int64_t> x(1600), y(1600);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = d(rng);
    y[i] = d(rng);
  }
  auto b = build(xy_table(x, y), HostIndexConfig::clustered("x", 4), 4);
  ASSERT_EQ(b.grid.cells.size(), 16u);
  double chi2 = 0;
  for (const auto& c : b.grid.cells) chi2 += (c.count - 100.0) * (c.count - 100.0) / 100.0;
  // 9 degrees of freedom; 27.9 is the 0.999 quantile.
  EXPECT_LT(chi2, 27.9);
}

TEST(CellGrid, SingleHostBucketHasOneCellPerTarget) {
  std::vector<std::int64_t> x(100, 1), y(100);
  for (int i = 0; i < 100; ++i) y[i] = i % 7;
  auto b = build(xy_table(x, y), HostIndexConfig::clustered("x", 5), 20);
  ASSERT_EQ(b.host.bucket_count(), 1u);
  EXPECT_EQ(b.grid.cells.size(), 7u);
}

TEST(CellGrid, MatchesCountingOracle) {
  auto b = random_built(3, 5000, 40, 50);
  oracle::CellCounts got;
  for (const auto& c : b.grid.cells) {
    ASSERT_GE(c.count, 1u);
    got[{c.target, c.host}] = c.count;
  }
  EXPECT_EQ(got, oracle::count_cells(b.table, 1, b.buckets));
  EXPECT_EQ(b.grid.records(), b.table.row_count());
  for (auto h : b.host.live_ids()) EXPECT_EQ(b.grid.host_size(h), b.host.count(h));
}

// ---------------------------------------------------------------------------
// Inlier map and stash lookups

TEST(InlierHosts, ToyUnion) {
  OutlierAssignment a;
  a.inlier_map = {{0}, {0, 1}, {2}};
  a.stash.resize(3);
  a.cells.resize(3);
  auto b = TargetBuckets::from_edges({0, 10, 20}, 30);
  EXPECT_EQ(inlier_hosts(a, b, {5, 15}), (std::vector<HostBucketId>{0, 1}));
  EXPECT_TRUE(inlier_hosts(a, b, {12, 12}).empty());
  EXPECT_EQ(inlier_hosts(a, b, {0, 30}), (std::vector<HostBucketId>{0, 1, 2}));
}

TEST(OutlierKeys, EmptyWholeAndHalfBucket) {
  auto b = random_built(11, 3000, 30, 10);
  Classification all_out(b.grid.cells.size(), CellClass::outlier);
  auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, all_out);
  EXPECT_TRUE(outlier_keys(a, b.buckets, {100, 100}).empty());

  auto whole = b.buckets.bucket(4).value_range;
  std::vector<ClusteredKey> stashed;
  for (const auto& e : a.stash[4]) stashed.push_back(e.key);
  std::sort(stashed.begin(), stashed.end());
  EXPECT_EQ(outlier_keys(a, b.buckets, whole), stashed);

  ValueRange half{whole.lo, whole.lo + (whole.hi - whole.lo) / 2};
  auto got = outlier_keys(a, b.buckets, half);
  EXPECT_LT(got.size(), stashed.size());
  EXPECT_EQ(got, oracle::filter_keys(b.table, 1, half));
}

// ---------------------------------------------------------------------------
// Materialization

Built seven_cell_fixture() {
  // Host bucket 0 holds x in [0,10): seven rows with y=100 and three with y=0.
  std::vector<std::int64_t> x(20), y(20, 0);
  std::iota(x.begin(), x.end(), 0);
  for (int i = 0; i < 7; ++i) y[i] = 100;
  return build(xy_table(x, y), HostIndexConfig::clustered("x", 2), 2);
}

TEST(Materialize, AllInlier) {
  auto b = seven_cell_fixture();
  Classification cls(b.grid.cells.size(), CellClass::inlier);
  auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, cls);
  EXPECT_EQ(a.stash_size(), 0u);
  for (const auto& c : b.grid.cells) {
    const auto& m = a.inlier_map[c.target];
    EXPECT_TRUE(std::binary_search(m.begin(), m.end(), c.host));
  }
  EXPECT_EQ(a.inlier_map_entries(), b.grid.cells.size());
}

TEST(Materialize, AllOutlier) {
  auto b = seven_cell_fixture();
  Classification cls(b.grid.cells.size(), CellClass::outlier);
  auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, cls);
  EXPECT_EQ(a.stash_size(), b.table.row_count());
  EXPECT_EQ(a.inlier_map_entries(), 0u);
}

TEST(Materialize, SingleOutlierCellOfSeven) {
  auto b = seven_cell_fixture();
  ASSERT_EQ(b.grid.cells.size(), 3u);
  const auto t_hi = b.buckets.locate(100);
  const auto h0 = bucket_of(b.table.key(0));
  Classification cls(b.grid.cells.size(), CellClass::inlier);
  for (std::size_t i = 0; i < cls.size(); ++i)
    if (b.grid.cells[i].target == t_hi && b.grid.cells[i].host == h0) {
      ASSERT_EQ(b.grid.cells[i].count, 7u);
      cls[i] = CellClass::outlier;
    }
  auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, cls);
  EXPECT_EQ(a.stash_size(), 7u);
  EXPECT_FALSE(std::binary_search(a.inlier_map[t_hi].begin(), a.inlier_map[t_hi].end(), h0));
  const auto t_lo = b.buckets.locate(0);
  EXPECT_TRUE(std::binary_search(a.inlier_map[t_lo].begin(), a.inlier_map[t_lo].end(), h0));
}

TEST(Materialize, RejectsPartialClassification) {
  auto b = seven_cell_fixture();
  EXPECT_THROW(materialize_assignment(b.table, 1, b.buckets, b.grid, Classification(1)), Error);
}

// ---------------------------------------------------------------------------
// Properties

TEST(Properties, EveryRowCoveredExactlyOnce) {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 10; ++trial) {
    auto b = random_built(200 + trial, 2000, 25, 30);
    auto cls = random_classes(rng, b.grid.cells.size());
    auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, cls);
    std::set<ClusteredKey> stashed;
    for (TargetBucketId t = 0; t < a.stash.size(); ++t)
      for (const auto& e : a.stash[t]) {
        ASSERT_EQ(b.buckets.locate(e.value), t);
        stashed.insert(e.key);
      }
    for (RowId r = 0; r < b.table.row_count(); ++r) {
      auto t = b.buckets.locate(b.table.value(1, r));
      auto h = bucket_of(b.table.key(r));
      bool inlier = std::binary_search(a.inlier_map[t].begin(), a.inlier_map[t].end(), h);
      bool in_stash = stashed.count(b.table.key(r)) > 0;
      ASSERT_NE(inlier, in_stash) << "row " << r;
    }
  }
}

TEST(Properties, SpaceOverheadEqualsStashLength) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto b = random_built(300 + trial, 4000, 30, 30);
    ASSERT_LE(b.grid.cells.size(), 1000u);
    auto cls = random_classes(rng, b.grid.cells.size());
    auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, cls);
    ASSERT_EQ(space_overhead(b.grid, cls), a.stash_size());
    ASSERT_EQ(a.outlier_records(), a.stash_size());
  }
}

TEST(Properties, InlierHostsMatchCellScan) {
  std::mt19937_64 rng(9);
  auto b = random_built(77, 5000, 40, 60);
  auto cls = random_classes(rng, b.grid.cells.size());
  auto a = materialize_assignment(b.table, 1, b.buckets, b.grid, cls);
  std::uniform_int_distribution<std::int64_t> d(-200, 10200);
  for (int i = 0; i < 1000; ++i) {
    auto lo = d(rng), hi = d(rng);
    if (lo > hi) std::swap(lo, hi);
    ValueRange r{lo, hi};
    std::set<HostBucketId> want;
    if (!r.empty())
      for (std::size_t k = 0; k < b.grid.cells.size(); ++k) {
        const auto& c = b.grid.cells[k];
        auto tr = b.buckets.bucket(c.target).value_range;
        // Extreme buckets absorb clamped values.
        if (c.target == 0) tr.lo = std::numeric_limits<std::int64_t>::min();
        if (c.target + 1 == b.buckets.size()) tr.hi = std::numeric_limits<std::int64_t>::max();
        if (cls[k] == CellClass::inlier && tr.lo < r.hi && r.lo < tr.hi) want.insert(c.host);
      }
    ASSERT_EQ(inlier_hosts(a, b.buckets, r), std::vector<HostBucketId>(want.begin(), want.end()));
    auto keys = outlier_keys(a, b.buckets, r);
    auto all = oracle::filter_keys(b.table, 1, r);
    ASSERT_TRUE(std::includes(all.begin(), all.end(), keys.begin(), keys.end()));
  }
}

}  // namespace
