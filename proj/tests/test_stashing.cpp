#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cortex/stashing.hpp"
#include "oracles.hpp"

namespace {

using namespace cortex;

CellGrid grid_of(std::vector<Cell> cells, std::vector<std::size_t> host_sizes) {
  CellGrid g;
  g.cells = std::move(cells);
  g.host_sizes = std::move(host_sizes);
  g.normalize();
  return g;
}

// {(t0,h0): 10 of |h0| = 10, (t0,h1): 1 of |h1| = 100}. h1's other 99 rows
// sit in t1 so the grid stays feasible.
CellGrid two_cell_example() { return grid_of({{0, 0, 10}, {0, 1, 1}, {1, 1, 99}}, {10, 100}); }

std::size_t outlier_count(const Classification& c) {
  return static_cast<std::size_t>(std::count(c.begin(), c.end(), CellClass::outlier));
}

// ---------------------------------------------------------------------------
// P0 and cost

TEST(InitialOverhead, DiagonalGrid) {
  std::vector<Cell> cells;
  for (std::uint32_t i = 0; i < 5; ++i) cells.push_back({i, i, 10});
  EXPECT_EQ(initial_scan_overhead(grid_of(cells, std::vector<std::size_t>(5, 10))), 50u);
}

TEST(InitialOverhead, OneHostUnderEveryTarget) {
  std::vector<Cell> cells;
  for (std::uint32_t t = 0; t < 8; ++t) cells.push_back({t, 0, 25});
  EXPECT_EQ(initial_scan_overhead(grid_of(cells, {200})), 8u * 200u);
}

TEST(InitialOverhead, MatchesDoubleLoop) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = oracle::random_grid(rng, 9);
    std::uint64_t want = 0;
    for (std::uint32_t t = 0; t < 5; ++t)
      for (std::uint32_t h = 0; h < 6; ++h)
        for (const auto& c : g.cells)
          if (c.target == t && c.host == h) want += g.host_sizes[h];
    ASSERT_EQ(initial_scan_overhead(g), want);
  }
}

TEST(Cost, AllInlierIsP0) {
  auto g = two_cell_example();
  Classification cls(g.cells.size(), CellClass::inlier);
  auto p = cost_params(g, 3.0, 2.0);
  EXPECT_DOUBLE_EQ(assignment_cost(g, cls, p), static_cast<double>(initial_scan_overhead(g)));
}

TEST(Cost, AllOutlierWithZeroAlphaIsBetaN) {
  auto g = two_cell_example();
  Classification cls(g.cells.size(), CellClass::outlier);
  EXPECT_DOUBLE_EQ(assignment_cost(g, cls, cost_params(g, 0.0, 2.5)), 2.5 * 110);
}

TEST(Cost, HandEvaluatedExample) {
  // Only the t0 row matters here; the t1 cell is held inlier in both classifications.
  auto g = two_cell_example();
  Classification cls{CellClass::inlier, CellClass::outlier, CellClass::inlier};
  auto p = cost_params(g, 0.0, 2.0);
  const double t1_part = 100;
  EXPECT_DOUBLE_EQ(assignment_cost(g, cls, p) - t1_part, 12.0);
  EXPECT_DOUBLE_EQ(assignment_cost(g, cls, p),
                   static_cast<double>(oracle::cost_by_definition(g, cls, 0.0L, 2.0L)));
}

TEST(Cost, AgreesWithDefinitionOnRandomGrids) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(0, 4), b(0.5, 30);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 500; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    Classification cls(g.cells.size());
    for (auto& c : cls) c = coin(rng) ? CellClass::outlier : CellClass::inlier;
    double alpha = a(rng), beta = b(rng);
    auto want = oracle::cost_by_definition(g, cls, alpha, beta);
    ASSERT_NEAR(assignment_cost(g, cls, cost_params(g, alpha, beta)), static_cast<double>(want),
                1e-9 * static_cast<double>(want));
  }
}

// ---------------------------------------------------------------------------
// Alpha rule

TEST(AlphaRule, FullCellStaysInlier) {
  auto g = grid_of({{0, 0, 40}}, {40});
  EXPECT_EQ(assign_outliers_alpha(g, 0.0, 1.0)[0], CellClass::inlier);
  EXPECT_EQ(assign_outliers_alpha(g, 2.0, 5.0)[0], CellClass::inlier);
}

TEST(AlphaRule, ExampleMatchesExhaustiveSearch) {
  auto g = grid_of({{0, 0, 10}, {0, 1, 1}}, {10, 100});
  auto cls = assign_outliers_alpha(g, 0.0, 2.0);
  EXPECT_EQ(cls, (Classification{CellClass::inlier, CellClass::outlier}));
  auto p = cost_params(g, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(assignment_cost(g, cls, p), 12.0);
  EXPECT_DOUBLE_EQ(oracle::exhaustive_min_cost(g, p), 12.0);
}

TEST(AlphaRule, EqualityResolvesToInlier) {
  // threshold 2 exactly: 2 * 5 == 10.
  auto g = grid_of({{0, 0, 5}, {1, 0, 5}}, {10});
  EXPECT_EQ(outlier_count(assign_outliers_alpha(g, 0.0, 2.0)), 0u);
  EXPECT_EQ(outlier_count(assign_outliers_alpha(g, 0.0, 1.999)), 2u);
}

TEST(AlphaRule, LargeAlphaSelectsFewerOutliers) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    ASSERT_LE(outlier_count(assign_outliers_alpha(g, 5.0, 1.0)), outlier_count(assign_outliers_alpha(g, 0.2, 1.0)));
  }
}

TEST(AlphaRule, RejectsBadParameters) {
  auto g = two_cell_example();
  EXPECT_THROW(assign_outliers_alpha(g, -1.0, 2.0), Error);
  EXPECT_THROW(assign_outliers_alpha(g, 1.0, 0.0), Error);
}

// ---------------------------------------------------------------------------
// Properties

TEST(Properties, RuleIsExhaustiveArgmin) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> a(0, 3), b(0.25, 12);
  for (int trial = 0; trial < 400; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    double alpha = a(rng), beta = b(rng);
    auto cls = assign_outliers_alpha(g, alpha, beta);
    auto p = cost_params(g, alpha, beta);
    ASSERT_LE(assignment_cost(g, cls, p), oracle::exhaustive_min_cost(g, p)) << "trial " << trial;
  }
}

TEST(Properties, IntegerThresholdTiesAreCostNeutral) {
  // Integral thresholds make exact ties common; the inlier choice must still be optimal.
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> b(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = oracle::random_grid(rng, 10);
    double beta = b(rng);
    auto cls = assign_outliers_alpha(g, 0.0, beta);
    auto p = cost_params(g, 0.0, beta);
    for (std::size_t i = 0; i < g.cells.size(); ++i)
      if (beta * static_cast<double>(g.cells[i].count) == static_cast<double>(g.host_sizes[g.cells[i].host])) {
        ASSERT_EQ(cls[i], CellClass::inlier);
      }
    ASSERT_EQ(assignment_cost(g, cls, p), oracle::exhaustive_min_cost(g, p));
  }
}

TEST(Properties, TargetBucketsOptimizeIndependently) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = oracle::random_grid(rng, 16);
    const double alpha = 1.0, beta = 3.0;
    auto full = assign_outliers_alpha(g, alpha, beta);
    // Optimize each target row alone, pricing stash records with the full-grid threshold.
    const double thr = cost_params(g, alpha, beta).threshold();
    for (std::uint32_t t = 0; t < g.target_count; ++t) {
      CellGrid row;
      row.host_sizes = g.host_sizes;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < g.cells.size(); ++i)
        if (g.cells[i].target == t) {
          row.cells.push_back(g.cells[i]);
          idx.push_back(i);
        }
      if (row.cells.empty()) continue;
      CostParams p{0.0, thr, row.records(), 0};
      auto part = assign_outliers_alpha(row, 0.0, thr);
      ASSERT_EQ(assignment_cost(row, part, p), oracle::exhaustive_min_cost(row, p));
      for (std::size_t k = 0; k < idx.size(); ++k) ASSERT_EQ(part[k], full[idx[k]]);
    }
  }
}

TEST(Properties, AlphaMonotone) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> a(0, 5), b(0.5, 10);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    double a1 = a(rng), a2 = a(rng), beta = b(rng);
    if (a1 > a2) std::swap(a1, a2);
    auto o1 = assign_outliers_alpha(g, a1, beta);
    auto o2 = assign_outliers_alpha(g, a2, beta);
    for (std::size_t i = 0; i < g.cells.size(); ++i)
      if (o2[i] == CellClass::outlier) {
        ASSERT_EQ(o1[i], CellClass::outlier);
      }
  }
}

TEST(Properties, AllInlierCostIsP0) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    Classification cls(g.cells.size(), CellClass::inlier);
    ASSERT_EQ(assignment_cost(g, cls, cost_params(g, 1.7, 9.0)), static_cast<double>(initial_scan_overhead(g)));
  }
}

// ---------------------------------------------------------------------------
// Budget mode

TEST(Budget, ZeroBudgetIsAllInlier) {
  std::mt19937_64 rng(11);
  auto g = oracle::random_grid(rng, 12);
  EXPECT_EQ(outlier_count(assign_outliers_budget(g, 0, 1.0)), 0u);
}

TEST(Budget, SlackBudgetMatchesZeroAlpha) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> b(0.5, 10);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    double beta = b(rng);
    ASSERT_EQ(assign_outliers_budget(g, g.records(), beta), assign_outliers_alpha(g, 0.0, beta));
  }
}

TEST(Budget, HigherDensityWinsWhenOnlyOneFits) {
  // Densities: (100 - 10) / 10 = 9 and (100 - 40) / 40 = 1.5.
  auto g = grid_of({{0, 0, 10}, {1, 1, 40}, {1, 0, 90}, {0, 1, 60}}, {100, 100});
  auto cls = assign_outliers_budget(g, 45, 1.0);
  std::size_t chosen = 0;
  for (std::size_t i = 0; i < g.cells.size(); ++i)
    if (cls[i] == CellClass::outlier) {
      ++chosen;
      EXPECT_EQ(g.cells[i].count, 10u);
    }
  EXPECT_EQ(chosen, 1u);
  // Two-cell enumeration: the admitted cell gives the larger benefit per stashed record.
  double d_small = (100.0 - 10) / 10, d_large = (100.0 - 40) / 40;
  EXPECT_GT(d_small, d_large);
}

TEST(Budget, WeightsReorderCandidates) {
  auto g = grid_of({{0, 0, 10}, {1, 1, 40}, {1, 0, 90}, {0, 1, 60}}, {100, 100});
  std::vector<double> w{0.1, 10.0};
  auto cls = assign_outliers_budget(g, 45, 1.0, w);
  for (std::size_t i = 0; i < g.cells.size(); ++i)
    EXPECT_EQ(cls[i] == CellClass::outlier, g.cells[i].count == 40u);
}

TEST(Budget, NeverExceedsLimit) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> lim(0, 300);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = oracle::random_grid(rng, 12);
    auto limit = lim(rng);
    ASSERT_LE(space_overhead(g, assign_outliers_budget(g, limit, 1.0)), limit);
  }
}

// ---------------------------------------------------------------------------
// Calibration

std::vector<CalibrationSample> injected_samples(double noise, std::uint64_t seed) {
  InjectedTiming timing(5, 50, 10, noise, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<CalibrationSample> out;
  for (int i = 0; i < 1000; ++i) {
    double s = std::pow(10.0, -4 + u(rng) * 2.7);
    double scanned = std::round(s * 1e5 * (1 + 3 * u(rng)));
    double lookups = std::round(s * 1e5 * u(rng));
    out.push_back({scanned, lookups, timing(scanned, lookups)});
  }
  return out;
}

TEST(Calibration, NoiselessRecoveryIsExact) {
  auto fit = fit_timing_model(injected_samples(0, 21));
  EXPECT_NEAR(fit.c1, 5, 1e-6);
  EXPECT_NEAR(fit.c2, 50, 1e-6);
  EXPECT_NEAR(fit.c3, 10, 1e-4);
  EXPECT_NEAR(fit.beta, 10, 1e-6);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_EQ(fit.samples, 1000u);
}

TEST(Calibration, FivePercentNoise) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    auto fit = fit_timing_model(injected_samples(0.05, seed));
    EXPECT_NEAR(fit.beta, 10, 1.0) << "seed " << seed;
    EXPECT_GE(fit.r_squared, 0.97) << "seed " << seed;
    EXPECT_LE(fit.r_squared, 1.0);
  }
}

TEST(Calibration, DegenerateDesignRejected) {
  std::vector<CalibrationSample> flat(10, {100, 5, 700});
  EXPECT_THROW(fit_timing_model(flat), Error);
  std::vector<CalibrationSample> collinear;
  for (int i = 1; i <= 10; ++i) collinear.push_back({10.0 * i, 2.0 * i, 70.0 * i});
  EXPECT_THROW(fit_timing_model(collinear), Error);
  EXPECT_THROW(fit_timing_model(std::vector<CalibrationSample>(2)), Error);
}

}  // namespace
