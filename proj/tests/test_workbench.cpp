#include <gtest/gtest.h>

#include <cstdlib>
#include <numeric>

#include "cortex/workbench.hpp"
#include "oracles.hpp"

namespace {

using namespace cortex;

double fraction_changed(const Table& t) {
  std::size_t changed = 0;
  for (RowId r = 0; r < t.row_count(); ++r) changed += t.value(0, r) != t.value(1, r);
  return static_cast<double>(changed) / static_cast<double>(t.row_count());
}

SyntheticSpec spec_with(std::size_t rows, double f, double sigma, std::uint64_t seed = 42) {
  SyntheticSpec s;
  s.rows = rows;
  s.noise_fraction = f;
  s.noise_scale = sigma;
  s.seed = seed;
  return s;
}

json small_bench(std::vector<double> alphas, std::vector<std::string> baselines) {
  return {{"seed", 5},
          {"dataset", {{"synthetic", {{"rows", 5000}, {"noise_fraction", 0.2}}}}},
          {"host", {{"variant", "clustered_1d"}, {"columns", {"x"}}, {"max_buckets", 50}}},
          {"correlations", {{{"target_column", "y"}}}},
          {"alphas", alphas},
          {"beta", 10.0},
          {"selectivities", {0.001, 0.01}},
          {"queries_per_selectivity", 20},
          {"baselines", baselines}};
}

// ---------------------------------------------------------------------------
// Synthetic data

TEST(Synthetic, NoNoiseMeansIdentity) {
  EXPECT_EQ(fraction_changed(gen_synthetic(spec_with(10'000, 0.0, 2e5))), 0.0);
}

TEST(Synthetic, ZeroScaleMeansIdentity) {
  EXPECT_EQ(fraction_changed(gen_synthetic(spec_with(10'000, 1.0, 0.0))), 0.0);
}

TEST(Synthetic, HalfNoisyRows) {
  auto t = gen_synthetic(spec_with(100'000, 0.5, 2e5));
  EXPECT_NEAR(fraction_changed(t), 0.5, 0.02);
  for (RowId r = 0; r < t.row_count(); ++r) {
    ASSERT_GE(t.value(1, r), 0);
    ASSERT_LE(t.value(1, r), 1'000'000);
  }
}

TEST(Synthetic, NoiseIsLaplaceWithScaleSigma) {
  // For Laplace(b) the mean absolute deviation is b; clamping only shrinks it.
  auto t = gen_synthetic(spec_with(100'000, 1.0, 1000));
  double abs_sum = 0, sum = 0;
  for (RowId r = 0; r < t.row_count(); ++r) {
    double d = static_cast<double>(t.value(1, r) - t.value(0, r));
    abs_sum += std::abs(d);
    sum += d;
  }
  EXPECT_NEAR(abs_sum / 100'000, 1000, 30);
  EXPECT_NEAR(sum / 100'000, 0, 30);
}

TEST(Synthetic, DeterministicUnderSeed) {
  auto a = gen_synthetic(spec_with(2000, 0.3, 5e4, 7));
  auto b = gen_synthetic(spec_with(2000, 0.3, 5e4, 7));
  auto c = gen_synthetic(spec_with(2000, 0.3, 5e4, 8));
  auto col = [](const Table& t, std::size_t i) { return std::vector<std::int64_t>(t.column(i).begin(), t.column(i).end()); };
  EXPECT_EQ(col(a, 1), col(b, 1));
  EXPECT_NE(col(a, 1), col(c, 1));
}

TEST(Synthetic, AuxColumnsAndBadFraction) {
  auto s = spec_with(100, 0.2, 10);
  s.aux_columns = 2;
  auto t = gen_synthetic(s);
  EXPECT_EQ(t.column_count(), 4u);
  EXPECT_TRUE(t.find_column("z1").has_value());
  EXPECT_THROW(gen_synthetic(spec_with(100, 1.5, 10)), Error);
}

// ---------------------------------------------------------------------------
// Workloads

TEST(Workload, FullSelectivityCoversDomain) {
  auto t = gen_synthetic(spec_with(5000, 0.2, 2e5));
  auto w = gen_workload(t, {"y", 1.0, 3, 1});
  for (double s : w.selectivities) EXPECT_EQ(s, 1.0);
}

TEST(Workload, UniformDataGivesThousandWideQueries) {
  std::vector<std::int64_t> v(1'000'000);
  std::iota(v.begin(), v.end(), 1);
  auto t = Table::with_ordinal_keys({ColumnMeta::integer("v")}, {v});
  auto w = gen_workload(t, {"v", 0.001, 200, 3});
  double mean_width = 0;
  for (const auto& q : w.queries) mean_width += static_cast<double>(q.range.hi - q.range.lo);
  mean_width /= 200;
  // Near the domain edges a query widens to reach its count.
  EXPECT_NEAR(mean_width, 1000, 20);
}

TEST(Workload, EverySelectivityWithinFactorTwo) {
  auto t = gen_synthetic(spec_with(50'000, 0.2, 2e5));
  for (double s : {0.0001, 0.001, 0.01, 0.05}) {
    auto w = gen_workload(t, {"y", s, 100, 9});
    ASSERT_EQ(w.queries.size(), 100u);
    for (std::size_t i = 0; i < w.queries.size(); ++i) {
      auto count = oracle::filter_keys(t, 1, w.queries[i].range).size();
      double actual = static_cast<double>(count) / 50'000.0;
      ASSERT_DOUBLE_EQ(actual, w.selectivities[i]);
      ASSERT_GE(actual, s / 2);
      ASSERT_LE(actual, 2 * s);
    }
  }
}

TEST(Workload, DominantDuplicateIsUnreachable) {
  std::vector<std::int64_t> v(1000, 5);
  v[0] = 1;
  v[1] = 9;
  auto t = Table::with_ordinal_keys({ColumnMeta::integer("v")}, {v});
  EXPECT_THROW(gen_workload(t, {"v", 0.01, 1, 2}), Error);
  EXPECT_THROW(gen_workload(t, {"v", 0.0, 1, 2}), Error);
}

// ---------------------------------------------------------------------------
// Bench

TEST(Bench, AlphaSweepGivesOneCortexRowEach) {
  auto j = small_bench({0.2, 0.5, 1, 2, 5}, {"cortex"});
  j["selectivities"] = {0.001};
  auto rep = run_bench(parse_bench_config(j));
  ASSERT_EQ(rep.rows.size(), 5u);
  for (const auto& r : rep.rows) EXPECT_EQ(r.method, "cortex");
  for (std::size_t i = 1; i < rep.rows.size(); ++i) EXPECT_LE(rep.rows[i].stash_entries, rep.rows[i - 1].stash_entries);
}

TEST(Bench, FullScanOnlyGivesOneRowPerSelectivity) {
  auto rep = run_bench(parse_bench_config(small_bench({1}, {"full_scan"})));
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].selectivity, 0.001);
  EXPECT_EQ(rep.rows[1].selectivity, 0.01);
  EXPECT_EQ(rep.rows[0].mean_records_touched, 5000);
}

TEST(Bench, StashSizeEqualsOutlierCellSum) {
  auto cfg = parse_bench_config(small_bench({0.5, 2}, {"cortex"}));
  auto rep = run_bench(cfg);
  // Rebuild each index independently and sum outlier cells from the grid.
  auto table = load_dataset(cfg);
  auto host = HostIndex::build(table, cfg.host);
  ASSERT_EQ(rep.indexes.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const double alpha = cfg.alphas[i];
    const auto& c = cfg.correlations[0];
    auto col = table.column_index("y");
    auto buckets = build_target_buckets(table.column(col), c.resolved_bucket_count());
    auto grid = build_cell_grid(table, host, col, buckets);
    auto cls = assign_outliers_alpha(grid, alpha, cfg.beta);
    std::size_t want = 0;
    for (std::size_t k = 0; k < grid.cells.size(); ++k)
      if (cls[k] == CellClass::outlier) want += grid.cells[k].count;
    EXPECT_EQ(rep.indexes[i]["stash_entries"].get<std::size_t>(), want);
    for (const auto& r : rep.rows)
      if (r.alpha == alpha) {
        EXPECT_EQ(r.stash_entries, want);
      }
  }
}

TEST(Bench, CsvIsDeterministicWithoutTiming) {
  auto j = small_bench({0.5, 1}, {"full_scan", "secondary", "correlation_map", "cortex"});
  auto a = run_bench(parse_bench_config(j)).to_csv(false);
  auto b = run_bench(parse_bench_config(j)).to_csv(false);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.find("elapsed"), std::string::npos);
  EXPECT_NE(run_bench(parse_bench_config(j)).to_csv(true).find("elapsed"), std::string::npos);
}

TEST(Bench, DefaultTargetBucketsFollowSmallestSelectivity) {
  auto cfg = parse_bench_config(small_bench({1}, {"cortex"}));
  ASSERT_EQ(cfg.correlations.size(), 1u);
  EXPECT_EQ(cfg.correlations[0].resolved_bucket_count(), 1000u);
  auto j = small_bench({1}, {"cortex"});
  j["correlations"][0]["target_buckets"] = 64;
  EXPECT_EQ(parse_bench_config(j).correlations[0].resolved_bucket_count(), 64u);
}

TEST(Bench, EnvironmentSeedOverridesConfig) {
  auto j = small_bench({1}, {"full_scan"});
  ::setenv("CORTEX_SEED", "1234", 1);
  auto cfg = parse_bench_config(j);
  ::unsetenv("CORTEX_SEED");
  EXPECT_EQ(cfg.seed, 1234u);
  EXPECT_EQ(parse_bench_config(j).seed, 5u);
}

TEST(Bench, UnknownMethodRejected) {
  EXPECT_THROW(parse_bench_config(small_bench({1}, {"btree"})), Error);
}

TEST(Bench, MismatchRaisesExactnessViolation) {
  RangeQuery q{"y", {0, 10}};
  QueryResult want, got;
  want.ids = {1, 2, 3};
  got.ids = {1, 3, 4};
  EXPECT_THROW(detail::check_exact("cortex", q, got, want), ExactnessViolation);
  EXPECT_NO_THROW(detail::check_exact("cortex", q, want, want));
}

TEST(Bench, ReportJsonEchoesConfig) {
  auto j = small_bench({1}, {"cortex", "secondary"});
  auto rep = run_bench(parse_bench_config(j)).to_json(false);
  EXPECT_EQ(rep["config"], j);
  EXPECT_EQ(rep["records"], 5000);
  EXPECT_EQ(rep["rows"].size(), 4u);
  EXPECT_FALSE(rep["rows"][0].contains("mean_elapsed_ns"));
}

// ---------------------------------------------------------------------------
// Calibration through an index

TEST(Calibrate, InjectedTimingsRecoverBeta) {
  SyntheticSpec s = spec_with(50'000, 0.2, 2e5);
  CorrelationConfig cfg{"y"};
  auto idx = CortexIndex::build(gen_synthetic(s), HostIndexConfig::clustered("x", 500), {cfg}, {});
  CalibrationOptions opt;
  opt.injected = CalibrationOptions::Injected{5, 50, 10, 0.0};
  auto fit = calibrate_index(idx, "y", opt);
  EXPECT_NEAR(fit.beta, 10, 1e-6);
  EXPECT_NEAR(fit.r_squared, 1, 1e-9);
  opt.injected->noise = 0.05;
  fit = calibrate_index(idx, "y", opt);
  EXPECT_NEAR(fit.beta, 10, 1.0);
  EXPECT_GE(fit.r_squared, 0.97);
}

}  // namespace
