// cortex: command-line front end for the correlation index workbench.
//
// Exit codes: 0 success, 2 exactness violation, 1 any other error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cortex/workbench.hpp"

namespace {

using namespace cortex;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<ColumnSpec> parse_schema(const std::string& text) {
  std::vector<ColumnSpec> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    ColumnSpec spec;
    spec.name = item.substr(0, colon);
    if (colon != std::string::npos) spec.hint = parse_kind_hint(item.substr(colon + 1));
    out.push_back(spec);
  }
  return out;
}

Table open_table(const std::string& path) {
  if (ends_with(path, ".csv")) return ingest_csv(path);
  return load_table(path);
}

void store_table(const std::string& path, const Table& table) {
  if (ends_with(path, ".csv")) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    write_csv(out, table, false);
    return;
  }
  save_table(path, table);
}

json table_summary(const Table& table) {
  json cols = json::array();
  for (const auto& m : table.metas())
    cols.push_back({{"name", m.name},
                    {"kind", to_string(m.kind)},
                    {"exponent", m.exponent},
                    {"dictionary_size", m.dictionary.size()},
                    {"truncated", m.truncated}});
  return {{"rows", table.row_count()}, {"columns", std::move(cols)}};
}

/// Options shared by every command that builds an index.
struct IndexOptions {
  std::string table;
  std::string variant = "clustered_1d";
  std::vector<std::string> host_columns{"x"};
  std::size_t max_buckets = 100000;
  std::size_t max_leaf = 10000;
  std::string target = "y";
  std::optional<std::size_t> target_buckets;
  double lowest_selectivity = 0.001;
  double alpha = 1.0;
  double beta = 17.88;
  std::optional<std::size_t> max_stash;

  void attach(CLI::App* app) {
    app->add_option("--table", table, "Table file (.ctx dump or .csv)")->required();
    app->add_option("--host-variant", variant, "clustered_1d or octree");
    app->add_option("--host-columns", host_columns, "Host column(s)")->delimiter(',');
    app->add_option("--max-buckets", max_buckets, "1-D host bucket limit");
    app->add_option("--max-leaf", max_leaf, "Octree leaf capacity");
    app->add_option("--target", target, "Target column");
    app->add_option("--target-buckets", target_buckets, "N_t (default ceil(1/s_L))");
    app->add_option("--lowest-selectivity", lowest_selectivity, "s_L used to derive N_t");
    app->add_option("--alpha", alpha, "Space/speed tradeoff");
    app->add_option("--beta", beta, "Point lookup / scanned record cost ratio");
    app->add_option("--max-stash", max_stash, "Hard stash limit (replaces the alpha rule)");
  }

  HostIndexConfig host_config() const {
    json h{{"variant", variant}, {"columns", host_columns}, {"max_buckets", max_buckets}, {"max_leaf", max_leaf}};
    return parse_host_config(h);
  }

  CortexIndex build() const {
    CorrelationConfig cc;
    cc.target_column = target;
    cc.target_buckets = target_buckets;
    cc.lowest_selectivity = lowest_selectivity;
    StashPolicy policy;
    policy.alpha = alpha;
    policy.beta = beta;
    policy.max_stash = max_stash;
    return CortexIndex::build(open_table(table), host_config(), {cc}, policy);
  }
};

void emit(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

json query_json(const RangeQuery& q, double selectivity) {
  return {{"column", q.column}, {"lo", q.range.lo}, {"hi", q.range.hi}, {"selectivity", selectivity}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlation index workbench"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_csv_path, ingest_schema, ingest_key, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Encode a CSV file into a table dump");
  ingest->add_option("--csv", ingest_csv_path, "Input CSV")->required();
  ingest->add_option("--schema", ingest_schema, "name[:kind],... (kind: auto|int|float|cat)");
  ingest->add_option("--key", ingest_key, "Column holding clustered keys (default: row ordinals)");
  ingest->add_option("--out", ingest_out, "Output table (.ctx or .csv)")->required();

  // synth
  SyntheticSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a noisy y = x dataset");
  synth->add_option("--rows", synth_spec.rows, "Records");
  synth->add_option("--noise-fraction", synth_spec.noise_fraction, "Fraction f of noisy rows");
  synth->add_option("--noise-scale", synth_spec.noise_scale, "Laplace scale of the noise");
  synth->add_option("--aux-columns", synth_spec.aux_columns, "Extra uniform columns z0..");
  synth->add_option("--seed", synth_spec.seed, "RNG seed (CORTEX_SEED overrides)");
  synth->add_option("--out", synth_out, "Output table (.ctx or .csv)")->required();

  // workload
  std::string wl_table, wl_out;
  WorkloadSpec wl_spec;
  wl_spec.column = "y";
  auto* workload = app.add_subcommand("workload", "Generate range queries of a target selectivity");
  workload->add_option("--table", wl_table, "Table file")->required();
  workload->add_option("--column", wl_spec.column, "Column to filter");
  workload->add_option("--selectivity", wl_spec.selectivity, "Target selectivity s");
  workload->add_option("--count", wl_spec.count, "Queries");
  workload->add_option("--seed", wl_spec.seed, "RNG seed (CORTEX_SEED overrides)");
  workload->add_option("--out", wl_out, "Output JSON (default stdout)");

  // build
  IndexOptions build_opts;
  std::string build_out;
  bool build_buckets = false;
  auto* build = app.add_subcommand("build", "Build an index and print its structure");
  build_opts.attach(build);
  build->add_option("--out", build_out, "Output JSON (default stdout)");
  build->add_flag("--buckets", build_buckets, "Include per-bucket detail");

  // calibrate
  IndexOptions cal_opts;
  CalibrationOptions cal;
  std::vector<double> inject;
  double inject_noise = 0.05;
  auto* calibrate = app.add_subcommand("calibrate", "Fit the timing model and report beta");
  cal_opts.attach(calibrate);
  calibrate->add_option("--queries", cal.queries, "Calibration queries");
  calibrate->add_option("--seed", cal.seed, "RNG seed (CORTEX_SEED overrides)");
  calibrate->add_option("--inject", inject, "Use synthetic timings c1,c2,c3 instead of the clock")
      ->delimiter(',')
      ->expected(3);
  calibrate->add_option("--noise", inject_noise, "Relative noise of injected timings");

  // query
  IndexOptions q_opts;
  std::int64_t q_lo = 0, q_hi = 0;
  std::string q_method = "cortex";
  bool q_ids = false;
  auto* query = app.add_subcommand("query", "Run one range query and check it against a full scan");
  q_opts.attach(query);
  query->add_option("--lo", q_lo, "Inclusive lower bound (encoded)")->required();
  query->add_option("--hi", q_hi, "Exclusive upper bound (encoded)")->required();
  query->add_option("--method", q_method, "cortex|full_scan|secondary|correlation_map");
  query->add_flag("--ids", q_ids, "Print matching clustered keys");

  // insert
  IndexOptions ins_opts;
  std::string ins_rows, ins_out;
  std::size_t ins_batch = 1000;
  bool ins_revalidate = false;
  auto* insert = app.add_subcommand("insert", "Insert CSV rows through the update tracker");
  ins_opts.attach(insert);
  insert->add_option("--rows", ins_rows, "CSV with the table's columns")->required();
  insert->add_option("--batch", ins_batch, "Rows per batch");
  insert->add_flag("--revalidate", ins_revalidate, "Run revalidate after the last batch");
  insert->add_option("--out", ins_out, "Write the updated table here");

  // bench
  std::string bench_config, bench_json, bench_csv;
  bool no_timing = false;
  auto* bench = app.add_subcommand("bench", "Run a benchmark configuration");
  bench->add_option("--config", bench_config, "Bench config JSON")->required();
  bench->add_option("--json", bench_json, "Report JSON path (default stdout)");
  bench->add_option("--csv", bench_csv, "Report CSV path");
  bench->add_flag("--no-timing", no_timing, "Omit elapsed-time fields for reproducible reports");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      IngestOptions opts;
      opts.schema = parse_schema(ingest_schema);
      if (!ingest_key.empty()) opts.key_column = ingest_key;
      auto table = ingest_csv(ingest_csv_path, opts);
      store_table(ingest_out, table);
      emit(table_summary(table), "-");
    } else if (*synth) {
      synth_spec.seed = resolve_seed(synth_spec.seed);
      auto table = gen_synthetic(synth_spec);
      store_table(synth_out, table);
      emit(table_summary(table), "-");
    } else if (*workload) {
      wl_spec.seed = resolve_seed(wl_spec.seed);
      auto table = open_table(wl_table);
      auto w = gen_workload(table, wl_spec);
      json arr = json::array();
      for (std::size_t i = 0; i < w.queries.size(); ++i) arr.push_back(query_json(w.queries[i], w.selectivities[i]));
      emit(arr, wl_out);
    } else if (*build) {
      auto index = build_opts.build();
      index.check_invariants();
      const auto& c = index.correlation(build_opts.target);
      json j{{"host", host_stats_json(index.host(), build_buckets)}, {"correlation", assignment_json(index, c)}};
      if (!build_buckets) j["correlation"].erase("buckets");
      emit(j, build_out);
    } else if (*calibrate) {
      cal.seed = resolve_seed(cal.seed);
      if (!inject.empty()) cal.injected = CalibrationOptions::Injected{inject[0], inject[1], inject[2], inject_noise};
      auto index = cal_opts.build();
      auto fit = calibrate_index(index, cal_opts.target, cal);
      json j = to_json(fit);
      j["mode"] = cal.injected ? "injected" : "measured";
      emit(j, "-");
    } else if (*query) {
      auto index = q_opts.build();
      RangeQuery q{q_opts.target, {q_lo, q_hi}};
      const auto& table = index.table();
      QueryResult res;
      if (q_method == "cortex") res = execute(index, q);
      else if (q_method == "full_scan") res = full_scan(table, q);
      else if (q_method == "secondary") res = secondary_execute(SecondaryIndex::build(table, q.column), table, q);
      else if (q_method == "correlation_map")
        res = cm_execute(CorrelationMapBaseline::from_index(index, q.column), table, q);
      else throw Error("unknown method '" + q_method + "'");
      detail::check_exact(q_method, q, res, full_scan(table, q));
      json j{{"query", query_json(q, table.row_count() ? double(res.stats.result_size) / double(table.row_count()) : 0)},
             {"method", q_method},
             {"stats", to_json(res.stats)}};
      if (q_ids) j["ids"] = res.ids;
      emit(j, "-");
    } else if (*insert) {
      auto index = ins_opts.build();
      auto incoming = ingest_csv(ins_rows);
      const auto& table = index.table();
      std::vector<std::size_t> source;
      for (const auto& m : table.metas()) {
        auto src = incoming.find_column(m.name);
        if (!src) throw Error("insert rows lack column '" + m.name + "'");
        if (incoming.meta(*src).kind != ColumnKind::integer || m.kind != ColumnKind::integer)
          throw Error("insert currently accepts integer-encoded columns only ('" + m.name + "')");
        source.push_back(*src);
      }
      UpdateTracker tracker(index);
      ChangeReport total;
      std::vector<std::vector<std::int64_t>> batch;
      auto flush = [&] {
        if (batch.empty()) return;
        total += tracker.process_insert_batch(batch);
        batch.clear();
      };
      for (RowId r = 0; r < incoming.row_count(); ++r) {
        std::vector<std::int64_t> rec;
        for (auto s : source) rec.push_back(incoming.value(s, r));
        batch.push_back(std::move(rec));
        if (batch.size() >= std::max<std::size_t>(1, ins_batch)) flush();
      }
      flush();
      std::size_t corrections = ins_revalidate ? tracker.revalidate(&total) : 0;
      index.check_invariants();
      if (!ins_out.empty()) store_table(ins_out, index.table());
      json j = to_json(total);
      j["revalidate_corrections"] = corrections;
      j["records"] = index.record_count();
      emit(j, "-");
    } else if (*bench) {
      auto cfg = load_bench_config(bench_config);
      auto rep = run_bench(cfg);
      const bool timing = !no_timing;
      if (!bench_csv.empty()) {
        std::ofstream out(bench_csv);
        if (!out) throw Error("cannot write '" + bench_csv + "'");
        out << rep.to_csv(timing);
      }
      emit(rep.to_json(timing), bench_json);
    }
  } catch (const ExactnessViolation& e) {
    std::cerr << "exactness violation: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
