#pragma once
// Cost model and outlier assignment.
//
// For an assignment with inlier cells I and outlier cells O the cost charged
// over one query per target bucket is
//
//   C = sum_t [ sum_{h in I(t)} |h| + (beta + alpha * P0 / N) * sum_{h in O(t)} |(t,h)| ]
//
// where P0 is the scan overhead with every cell an inlier. Each cell
// contributes independently, so the minimum puts (t,h) in O exactly when
// (beta + alpha * P0 / N) * |(t,h)| < |h|. Equality keeps the cell an inlier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "cortex/correlation.hpp"

namespace cortex {

struct CostParams {
  double alpha = 1.0;
  double beta = 1.0;
  /// Records in the table (N).
  std::size_t records = 0;
  /// Initial scan overhead (P0), in records.
  std::uint64_t initial_overhead = 0;

  /// Per-record price of stashing: beta + alpha * P0 / N.
  double threshold() const {
    if (records == 0) return beta;
    return beta + alpha * (static_cast<double>(initial_overhead) / static_cast<double>(records));
  }
};

/// The product is formed in extended precision so the rule agrees exactly
/// with assignment_cost below.
inline bool is_outlier_cell(std::size_t cell_count, std::size_t host_size, double threshold) {
  return static_cast<long double>(threshold) * static_cast<long double>(cell_count) <
         static_cast<long double>(host_size);
}

/// P0: every host bucket counted once per target bucket it shares a cell with.
inline std::uint64_t initial_scan_overhead(const CellGrid& grid) {
  std::uint64_t p0 = 0;
  for (const auto& c : grid.cells) p0 += grid.host_size(c.host);
  return p0;
}

inline CostParams cost_params(const CellGrid& grid, double alpha, double beta) {
  return {alpha, beta, grid.records(), initial_scan_overhead(grid)};
}

/// Stash size SO(A): records in outlier cells.
inline std::size_t space_overhead(const CellGrid& grid, const Classification& cls) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.cells.size(); ++i)
    if (cls.at(i) == CellClass::outlier) n += grid.cells[i].count;
  return n;
}

/// Total cost in records-equivalent. Integer parts are summed exactly and the
/// threshold product is formed in extended precision, then rounded once.
inline double assignment_cost(const CellGrid& grid, const Classification& cls, const CostParams& params) {
  if (cls.size() != grid.cells.size()) throw Error("classification does not cover every cell");
  std::uint64_t scanned = 0;
  std::uint64_t stashed = 0;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (cls[i] == CellClass::inlier) scanned += grid.host_size(grid.cells[i].host);
    else stashed += grid.cells[i].count;
  }
  long double cost = static_cast<long double>(scanned) +
                     static_cast<long double>(params.threshold()) * static_cast<long double>(stashed);
  return static_cast<double>(cost);
}

inline Classification assign_outliers_alpha(const CellGrid& grid, double alpha, double beta) {
  if (alpha < 0) throw Error("alpha must be >= 0");
  if (!(beta > 0)) throw Error("beta must be > 0");
  const double thr = cost_params(grid, alpha, beta).threshold();
  Classification cls(grid.cells.size(), CellClass::inlier);
  for (std::size_t i = 0; i < grid.cells.size(); ++i)
    if (is_outlier_cell(grid.cells[i].count, grid.host_size(grid.cells[i].host), thr))
      cls[i] = CellClass::outlier;
  return cls;
}

/// Hard space limit: admits cells by weighted benefit per stashed record,
/// w_t * (|h| - beta * |(t,h)|) / |(t,h)|, highest first, skipping cells that
/// no longer fit. Empty weights mean uniform.
inline Classification assign_outliers_budget(const CellGrid& grid, std::size_t max_stash, double beta,
                                             std::span<const double> bucket_weights = {}) {
  if (!(beta > 0)) throw Error("beta must be > 0");
  for (auto w : bucket_weights)
    if (w < 0) throw Error("bucket weights must be >= 0");
  struct Candidate {
    std::size_t cell;
    double density;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const auto& c = grid.cells[i];
    double w = bucket_weights.empty() ? 1.0 : (c.target < bucket_weights.size() ? bucket_weights[c.target] : 0.0);
    double benefit = w * (static_cast<double>(grid.host_size(c.host)) - beta * static_cast<double>(c.count));
    if (benefit > 0) cands.push_back({i, benefit / static_cast<double>(c.count)});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.density > b.density; });
  Classification cls(grid.cells.size(), CellClass::inlier);
  std::size_t used = 0;
  for (const auto& cand : cands) {
    auto n = grid.cells[cand.cell].count;
    if (used + n > max_stash) continue;
    used += n;
    cls[cand.cell] = CellClass::outlier;
  }
  return cls;
}

// ---------------------------------------------------------------------------
// Timing model calibration

/// One measured (or injected) query: time = c1 * scanned + c2 * lookups + c3.
struct CalibrationSample {
  double scanned = 0;
  double lookups = 0;
  double elapsed_ns = 0;
};

struct CalibrationFit {
  double c1 = 0;
  double c2 = 0;
  double c3 = 0;
  double beta = 0;
  double r_squared = 0;
  std::size_t samples = 0;
};

/// Ordinary least squares for the three-term linear timing model.
inline CalibrationFit fit_timing_model(std::span<const CalibrationSample> samples) {
  if (samples.size() < 3) throw Error("calibration needs at least 3 samples");
  // Columns are centered before forming the normal equations for conditioning.
  double ms = 0, ml = 0, mt = 0;
  for (const auto& s : samples) {
    ms += s.scanned;
    ml += s.lookups;
    mt += s.elapsed_ns;
  }
  const double n = static_cast<double>(samples.size());
  ms /= n;
  ml /= n;
  mt /= n;
  double sss = 0, sll = 0, ssl = 0, sst = 0, slt = 0, stt = 0;
  for (const auto& s : samples) {
    double ds = s.scanned - ms, dl = s.lookups - ml, dt = s.elapsed_ns - mt;
    sss += ds * ds;
    sll += dl * dl;
    ssl += ds * dl;
    sst += ds * dt;
    slt += dl * dt;
    stt += dt * dt;
  }
  const double det = sss * sll - ssl * ssl;
  if (sss <= 0 || sll <= 0 || std::abs(det) <= 1e-12 * sss * sll)
    throw Error("calibration design is degenerate: scanned records and point lookups must vary independently");
  CalibrationFit fit;
  fit.c1 = (sst * sll - slt * ssl) / det;
  fit.c2 = (slt * sss - sst * ssl) / det;
  fit.c3 = mt - fit.c1 * ms - fit.c2 * ml;
  if (fit.c1 == 0) throw Error("calibration fit has zero scan cost; beta undefined");
  fit.beta = fit.c2 / fit.c1;
  double sse = 0;
  for (const auto& s : samples) {
    double e = s.elapsed_ns - (fit.c1 * s.scanned + fit.c2 * s.lookups + fit.c3);
    sse += e * e;
  }
  fit.r_squared = stt > 0 ? std::clamp(1.0 - sse / stt, 0.0, 1.0) : 1.0;
  fit.samples = samples.size();
  return fit;
}

/// Deterministic synthetic timings from known coefficients, with optional
/// multiplicative Gaussian noise of relative size `noise`.
class InjectedTiming {
 public:
  InjectedTiming(double c1, double c2, double c3, double noise, std::uint64_t seed)
      : c1_(c1), c2_(c2), c3_(c3), noise_(noise), rng_(seed) {}

  double operator()(double scanned, double lookups) {
    double t = c1_ * scanned + c2_ * lookups + c3_;
    if (noise_ > 0) t *= 1.0 + noise_ * gauss_(rng_);
    return t;
  }

 private:
  double c1_, c2_, c3_, noise_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace cortex
