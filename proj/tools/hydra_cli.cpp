// Command-line surface for the sketch pipeline: plan, generate, ingest,
// merge, query, eval, bench. JSON lines go to stdout, diagnostics to stderr.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hydra/hydra.hpp"

using json = nlohmann::ordered_json;
using namespace hydra;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("HYDRA_SEED")) return std::strtoull(env, nullptr, 10);
    return 1;
}

json config_to_json(const HydraConfig& cfg) {
    return json{{"r", cfg.r},
                {"w", cfg.w},
                {"r_cs", cfg.r_cs},
                {"w_cs", cfg.w_cs},
                {"L", cfg.L},
                {"k", cfg.k},
                {"stream_seed", cfg.stream_seed},
                {"max_key_bytes", cfg.max_key_bytes},
                {"counter_budget", cfg.counter_budget()},
                {"eps", cfg.eps},
                {"delta", cfg.delta},
                {"eps_us", cfg.eps_us},
                {"delta_us", cfg.delta_us},
                {"gmin_ratio", cfg.gmin_ratio},
                {"hash_family", std::string(kHashFamilyId)}};
}

HydraConfig config_from_json(const json& j) {
    HydraConfig cfg;
    cfg.r = j.at("r");
    cfg.w = j.at("w");
    cfg.r_cs = j.at("r_cs");
    cfg.w_cs = j.at("w_cs");
    cfg.L = j.at("L");
    cfg.k = j.at("k");
    cfg.stream_seed = j.at("stream_seed");
    cfg.max_key_bytes = j.value("max_key_bytes", 128u);
    cfg.eps = j.value("eps", 1.0 / double(cfg.w));
    cfg.delta = j.value("delta", 0.1);
    cfg.eps_us = j.value("eps_us", 0.1);
    cfg.delta_us = j.value("delta_us", 0.1);
    cfg.gmin_ratio = j.value("gmin_ratio", 1e-3);
    return cfg;
}

HydraConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_data("cannot open config file: " + path);
    json j;
    in >> j;
    return config_from_json(j);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

// "d0=NYC,d1=AppleTV" -> key; empty string selects the whole stream.
SubpopulationKey parse_selector(const std::string& selector,
                                const std::vector<std::string>& dims) {
    if (selector.empty()) return SubpopulationKey{};
    std::vector<SubpopulationKey::Predicate> preds;
    for (const auto& tok : split_list(selector)) {
        std::size_t eq = tok.find('=');
        if (eq == std::string::npos) throw_usage("bad predicate (expected name=value): " + tok);
        std::string name = tok.substr(0, eq);
        auto it = std::find(dims.begin(), dims.end(), name);
        if (it == dims.end()) throw_usage("unknown dimension: " + name);
        preds.emplace_back(std::uint32_t(it - dims.begin()), tok.substr(eq + 1));
    }
    return SubpopulationKey(std::move(preds));
}

std::string selector_of(const SubpopulationKey& key, const std::vector<std::string>& dims) {
    std::string out;
    for (const auto& [d, v] : key.predicates()) {
        if (!out.empty()) out += ",";
        out += (d < dims.size() ? dims[d] : "dim" + std::to_string(d)) + "=" + v;
    }
    return out;
}

void emit_query_result(const HydraSketch& hs, const SubpopulationKey& sp,
                       const std::string& selector, const GSumSpec& spec, double gmin_ratio) {
    json line;
    line["subpopulation"] = selector;
    line["statistic"] = statistic_name(spec);
    if (spec.stat == Statistic::heavy_hitters) {
        json hitters = json::array();
        for (const auto& [metric, est] : hs.heavy_hitters(sp, spec.alpha))
            hitters.push_back({{"metric", metric}, {"estimate", est}});
        line["hitters"] = hitters;
    } else {
        double est = hs.query(sp, spec);
        // Entropy is a finalized combination, not a G-sum; its band ratio
        // comes from the subpopulation's L1 share of the stream.
        GSumSpec ratio_spec = spec.stat == Statistic::entropy ? GSumSpec{Statistic::l1} : spec;
        double weight = spec.stat == Statistic::entropy ? hs.query(sp, ratio_spec) : est;
        double g_s = hs.g_s_estimate(ratio_spec);
        double ratio = weight > 0.0 && g_s > 0.0 ? std::max(1.0, g_s / weight) : 1.0 / gmin_ratio;
        ErrorBound band = error_bound(hs.config(), ratio);
        line["estimate"] = est;
        line["lower_bound"] = band.lower;
        line["upper_bound"] = band.upper;
        line["confidence"] = band.confidence;
    }
    std::cout << line.dump() << "\n";
}

struct EvalSetup {
    ExactStore store;
    Schema schema;
};

EvalSetup build_oracle(const std::string& corpus, const std::vector<std::string>& dims,
                       const std::string& metric) {
    EvalSetup setup;
    setup.schema = Schema{dims, metric};
    std::ifstream in(corpus);
    if (!in) throw_data("cannot open corpus: " + corpus);
    std::string header;
    if (!std::getline(in, header)) throw_data("schema mismatch: missing header row");
    auto bind = detail::bind_schema(header, setup.schema);
    std::string line;
    DataRecord rec;
    rec.dims.resize(dims.size());
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != bind.field_count) continue;
        for (std::size_t d = 0; d < dims.size(); d++) {
            auto v = fields[bind.dim_cols[d]];
            rec.dims[d] = v.empty() ? setup.schema.missing_token : std::string(v);
        }
        auto m = fields[bind.metric_col];
        rec.metric = m.empty() ? setup.schema.missing_token : std::string(m);
        setup.store.ingest(rec);
    }
    return setup;
}

json report_to_json(const StatReport& rep) {
    return json{{"statistic", rep.statistic},
                {"qualifying_subpopulations", rep.qualifying},
                {"band_coverage", rep.coverage},
                {"percentiles",
                 {{"p5", rep.p5}, {"p25", rep.p25}, {"p50", rep.p50}, {"p75", rep.p75},
                  {"p95", rep.p95}}},
                {"mean_abs_error", rep.mean_abs_error}};
}

double mean_abs_l1_error(const ExactStore& store, const HydraSketch& hs, double gmin_ratio) {
    return evaluate_statistic(store, hs, {Statistic::l1}, gmin_ratio).mean_abs_error;
}

int run(int argc, char** argv) {
    CLI::App app{"multidimensional telemetry sketching: one pass, many statistics"};
    app.require_subcommand(1);

    // ---- plan ----
    auto* plan_cmd = app.add_subcommand("plan", "derive a sketch configuration from targets");
    PlanTargets targets;
    targets.stream_seed = default_seed();
    std::string plan_json_out;
    plan_cmd->add_option("--delta", targets.delta, "failure probability (1 - confidence)");
    plan_cmd->add_option("--eps-us", targets.eps_us, "universal sketch relative error");
    plan_cmd->add_option("--gmin-ratio", targets.gmin_ratio, "G_min / G_S guarantee threshold");
    plan_cmd->add_option("--n-us", targets.n_us, "expected distinct subpopulations per cell");
    plan_cmd->add_option("--seed", targets.stream_seed, "stream seed");
    plan_cmd->add_option("--json", plan_json_out, "also write the config JSON to this path");
    plan_cmd->callback([&] {
        HydraConfig cfg = plan(targets);
        std::cout << config_to_json(cfg).dump(2) << "\n";
        std::cerr << describe(cfg);
        if (!plan_json_out.empty()) {
            std::ofstream out(plan_json_out);
            if (!out) throw_data("cannot write config: " + plan_json_out);
            out << config_to_json(cfg).dump(2) << "\n";
        }
    });

    // ---- generate ----
    auto* gen_cmd = app.add_subcommand("generate", "write a synthetic Zipf workload CSV");
    WorkloadSpec wspec;
    wspec.seed = default_seed();
    std::string gen_out;
    gen_cmd->add_option("--subpops", wspec.subpopulations, "number of base subpopulations");
    gen_cmd->add_option("--alpha", wspec.alpha, "Zipf skew");
    gen_cmd->add_option("--records", wspec.records, "record count");
    gen_cmd->add_option("--metric-domain", wspec.metric_domain, "metric values per subpopulation");
    gen_cmd->add_option("--metric-alpha", wspec.metric_alpha, "metric value skew (0 = uniform)");
    gen_cmd->add_option("--seed", wspec.seed, "rng seed");
    gen_cmd->add_option("--out", gen_out, "output CSV path")->required();
    gen_cmd->callback([&] {
        Workload wl = generate_workload(wspec);
        write_workload_csv(wl, gen_out);
        json manifest;
        manifest["spec"] = {{"subpopulations", wspec.subpopulations}, {"alpha", wspec.alpha},
                            {"records", wspec.records}, {"metric_domain", wspec.metric_domain},
                            {"metric_alpha", wspec.metric_alpha}, {"seed", wspec.seed}};
        Schema schema = workload_schema();
        manifest["schema"] = {{"dims", schema.dimensions}, {"metric", schema.metric}};
        manifest["rank_counts"] = wl.rank_counts;
        std::ofstream mout(gen_out + ".manifest.json");
        if (!mout) throw_data("cannot write manifest");
        mout << manifest.dump(2) << "\n";
        std::cerr << "wrote " << wspec.records << " records to " << gen_out << "\n";
    });

    // ---- shared ingest/query options ----
    std::string dims_arg = "d0,d1", metric_arg = "metric";

    // ---- ingest ----
    auto* ingest_cmd = app.add_subcommand("ingest", "build a sketch from a CSV stream");
    std::string ingest_in, ingest_out, ingest_cfg_path;
    std::uint32_t shards = 1;
    bool no_one_hash = false, no_one_layer = false;
    ingest_cmd->add_option("--input", ingest_in, "input CSV")->required();
    ingest_cmd->add_option("--dims", dims_arg, "comma-separated dimension columns");
    ingest_cmd->add_option("--metric", metric_arg, "metric column");
    ingest_cmd->add_option("--config", ingest_cfg_path, "config JSON from `plan --json`")->required();
    ingest_cmd->add_option("--shards", shards, "parallel ingestion shards");
    ingest_cmd->add_option("--out", ingest_out, "output .hsk path")->required();
    ingest_cmd->add_flag("--no-one-hash", no_one_hash, "disable single-hash substring splitting");
    ingest_cmd->add_flag("--no-one-layer", no_one_layer, "disable single-layer updates");
    ingest_cmd->callback([&] {
        HydraConfig cfg = load_config(ingest_cfg_path);
        Schema schema{split_list(dims_arg), metric_arg};
        IngestOptions opts{!no_one_hash, !no_one_layer};
        IngestResult res = ingest_csv(ingest_in, schema, cfg, shards, opts);
        save_sketch(res.sketch, ingest_out);
        std::cerr << "ingested " << res.rows_ingested << " rows (" << res.rows_skipped
                  << " skipped) into " << ingest_out << "\n";
    });

    // ---- merge ----
    auto* merge_cmd = app.add_subcommand("merge", "merge sketch files");
    std::string merge_out;
    std::vector<std::string> merge_inputs;
    bool heap_only = false;
    merge_cmd->add_option("--out", merge_out, "output .hsk path")->required();
    merge_cmd->add_option("inputs", merge_inputs, "input .hsk files")->required();
    merge_cmd->add_flag("--heap-only", heap_only, "merge heaps only (discard one side's counters)");
    merge_cmd->callback([&] {
        if (merge_inputs.size() < 2) throw_usage("merge needs at least two inputs");
        HydraSketch acc = load_sketch(merge_inputs[0]);
        for (std::size_t i = 1; i < merge_inputs.size(); i++)
            acc.merge(load_sketch(merge_inputs[i]),
                      heap_only ? MergeMode::heap_only : MergeMode::full);
        save_sketch(acc, merge_out);
        std::cerr << "merged " << merge_inputs.size() << " sketches into " << merge_out << "\n";
    });

    // ---- query ----
    auto* query_cmd = app.add_subcommand("query", "estimate statistics for subpopulations");
    std::string query_sketch, stats_arg = "l1", keys_file, all_observed_corpus;
    std::vector<std::string> selectors;
    double query_gmin = 1e-3;
    query_cmd->add_option("--sketch", query_sketch, "input .hsk")->required();
    query_cmd->add_option("--stats", stats_arg, "comma-separated statistics "
                          "(l1,l2,entropy,cardinality,heavy_hitters:<alpha>)");
    query_cmd->add_option("--dims", dims_arg, "dimension names used in selectors");
    query_cmd->add_option("--subpop", selectors,
                          "subpopulation selector, e.g. d0=NYC,d1=AppleTV; '' = whole stream");
    query_cmd->add_option("--keys-file", keys_file, "file with one selector per line");
    query_cmd->add_option("--all-observed", all_observed_corpus,
                          "enumerate subpopulations observed in this corpus CSV");
    query_cmd->add_option("--metric", metric_arg, "metric column (for --all-observed)");
    query_cmd->add_option("--gmin-ratio", query_gmin, "ratio used when an estimate is zero");
    query_cmd->callback([&] {
        HydraSketch hs = load_sketch(query_sketch);
        auto dims = split_list(dims_arg);
        std::vector<GSumSpec> specs;
        for (const auto& s : split_list(stats_arg)) specs.push_back(parse_statistic(s));
        if (specs.empty()) throw_usage("at least one statistic required");

        std::vector<std::pair<SubpopulationKey, std::string>> keys;
        for (const auto& sel : selectors) keys.emplace_back(parse_selector(sel, dims), sel);
        if (!keys_file.empty()) {
            std::ifstream in(keys_file);
            if (!in) throw_data("cannot open keys file: " + keys_file);
            std::string line;
            while (std::getline(in, line)) keys.emplace_back(parse_selector(line, dims), line);
        }
        if (!all_observed_corpus.empty()) {
            auto setup = build_oracle(all_observed_corpus, dims, metric_arg);
            for (const auto& enc : setup.store.observed_subpops()) {
                SubpopulationKey sp = SubpopulationKey::decode(enc);
                keys.emplace_back(sp, selector_of(sp, dims));
            }
        }
        for (const auto& [sp, sel] : keys) {
            for (const auto& spec : specs) emit_query_result(hs, sp, sel, spec, query_gmin);
        }
    });

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "compare a sketch against the exact oracle");
    std::string eval_sketch, eval_corpus, eval_csv_out;
    std::string eval_stats = "l1,l2,entropy,cardinality";
    double eval_gmin = 1e-3;
    bool sweep = false, force = false;
    eval_cmd->add_option("--sketch", eval_sketch, "input .hsk")->required();
    eval_cmd->add_option("--corpus", eval_corpus, "the CSV the sketch ingested")->required();
    eval_cmd->add_option("--dims", dims_arg, "dimension columns");
    eval_cmd->add_option("--metric", metric_arg, "metric column");
    eval_cmd->add_option("--stats", eval_stats, "statistics to evaluate");
    eval_cmd->add_option("--gmin-ratio", eval_gmin, "qualification threshold G_min/G_S");
    eval_cmd->add_option("--csv", eval_csv_out, "write per-subpopulation error rows to this CSV");
    eval_cmd->add_flag("--sweep", sweep, "run the configuration sweep and skew comparison");
    eval_cmd->add_flag("--force", force, "proceed on sketch/corpus record count mismatch");
    eval_cmd->callback([&] {
        HydraSketch hs = load_sketch(eval_sketch);
        auto dims = split_list(dims_arg);
        auto setup = build_oracle(eval_corpus, dims, metric_arg);

        double sketch_l1 = hs.query(SubpopulationKey{}, {Statistic::l1});
        if (std::abs(sketch_l1 - double(setup.store.records())) >
            0.05 * double(setup.store.records())) {
            std::cerr << "warning: sketch whole-stream L1 (" << sketch_l1
                      << ") does not match corpus record count (" << setup.store.records()
                      << ")\n";
            if (!force) throw_data("corpus/sketch mismatch; pass --force to proceed");
        }

        json out;
        out["records"] = setup.store.records();
        out["observed_subpopulations"] = setup.store.subpopulation_count();
        json reports = json::array();
        std::ofstream csv;
        if (!eval_csv_out.empty()) {
            csv.open(eval_csv_out);
            if (!csv) throw_data("cannot write csv: " + eval_csv_out);
            csv << "subpopulation,g_ratio,statistic,relative_error,in_band\n";
        }
        for (const auto& name : split_list(eval_stats)) {
            GSumSpec spec = parse_statistic(name);
            StatReport rep =
                evaluate_statistic(setup.store, hs, spec, eval_gmin, !eval_csv_out.empty());
            reports.push_back(report_to_json(rep));
            for (const auto& s : rep.samples) {
                csv << selector_of(SubpopulationKey::decode(s.encoded_subpop), dims) << ","
                    << s.g_ratio << "," << rep.statistic << "," << s.relative_error << ","
                    << (s.in_band ? 1 : 0) << "\n";
            }
        }
        out["reports"] = reports;

        if (sweep) {
            // (w, w_cs) sweep at the sketch's counter budget, plus the skew
            // comparison at alpha 0.7 vs 0.99 on same-size corpora.
            const HydraConfig base = hs.config();
            const std::uint64_t budget = base.counter_budget();
            json sweep_out = json::array();
            for (std::uint32_t w = 4; w <= budget / 4; w *= 2) {
                HydraConfig cfg = base;
                cfg.w = w;
                cfg.w_cs = std::uint32_t(budget / w);
                cfg.eps = 1.0 / double(w);
                HydraSketch swept(cfg);
                for (const auto& enc : setup.store.observed_subpops()) {
                    // rebuild from oracle contents (ingestion order irrelevant)
                    const auto* fm = setup.store.find(enc);
                    for (const auto& [m, f] : *fm) {
                        for (std::uint64_t i = 0; i < f; i++) swept.update_encoded(enc, m);
                    }
                }
                sweep_out.push_back({{"w", cfg.w},
                                     {"w_cs", cfg.w_cs},
                                     {"memory_bytes", serialized_size(cfg)},
                                     {"mean_abs_l1_error",
                                      mean_abs_l1_error(setup.store, swept, eval_gmin)}});
            }
            out["sweep"] = sweep_out;

            json skew = json::array();
            for (double alpha : {0.7, 0.99}) {
                Workload wl = generate_workload({.subpopulations = 300, .alpha = alpha,
                                                 .records = 30000, .metric_domain = 4,
                                                 .seed = base.stream_seed + 1});
                ExactStore store;
                HydraSketch sk(base);
                for (const auto& rec : wl.records) {
                    store.ingest(rec);
                    sk.ingest(rec);
                }
                skew.push_back({{"alpha", alpha},
                                {"mean_abs_l1_error", mean_abs_l1_error(store, sk, eval_gmin)}});
            }
            out["skew"] = skew;
        }
        std::cout << out.dump(2) << "\n";
    });

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "time the performance optimizations");
    std::string bench_corpus, bench_cfg_path;
    bench_cmd->add_option("--corpus", bench_corpus, "input CSV")->required();
    bench_cmd->add_option("--dims", dims_arg, "dimension columns");
    bench_cmd->add_option("--metric", metric_arg, "metric column");
    bench_cmd->add_option("--config", bench_cfg_path, "config JSON")->required();
    bench_cmd->callback([&] {
        HydraConfig cfg = load_config(bench_cfg_path);
        auto dims = split_list(dims_arg);
        Schema schema{dims, metric_arg};

        // Parse once so the timings isolate sketch update work.
        auto setup = build_oracle(bench_corpus, dims, metric_arg);
        std::vector<std::pair<std::string, std::string>> updates;  // (encoded subpop, metric)
        // Re-derive the fanned-out update stream from the corpus.
        {
            std::ifstream in(bench_corpus);
            std::string header, line;
            std::getline(in, header);
            auto bind = detail::bind_schema(header, schema);
            DataRecord rec;
            rec.dims.resize(dims.size());
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                auto fields = detail::split_csv_line(line);
                if (fields.size() != bind.field_count) continue;
                for (std::size_t d = 0; d < dims.size(); d++)
                    rec.dims[d] = std::string(fields[bind.dim_cols[d]]);
                rec.metric = std::string(fields[bind.metric_col]);
                for (const auto& sp : fanout(rec)) updates.emplace_back(sp.encode(), rec.metric);
            }
        }

        auto time_ingest = [&](IngestOptions opts) {
            HydraSketch hs(cfg, opts);
            auto t0 = std::chrono::steady_clock::now();
            for (const auto& [enc, m] : updates) hs.update_encoded(enc, m);
            auto t1 = std::chrono::steady_clock::now();
            return std::pair{std::chrono::duration<double, std::milli>(t1 - t0).count(),
                             std::move(hs)};
        };

        json out;
        json ingest_rows = json::array();
        struct Toggle {
            const char* name;
            IngestOptions opts;
        };
        for (const Toggle& t : {Toggle{"optimized", {true, true}},
                                Toggle{"no_one_hash", {false, true}},
                                Toggle{"no_one_layer", {true, false}},
                                Toggle{"naive", {false, false}}}) {
            auto [ms, hs] = time_ingest(t.opts);
            ingest_rows.push_back(
                {{"mode", t.name},
                 {"ingest_ms", ms},
                 {"mean_abs_l1_error", mean_abs_l1_error(setup.store, hs, 1e-3)}});
        }
        out["ingest"] = ingest_rows;

        // Merge timing: 8 shards, FULL vs HEAP_ONLY.
        std::vector<HydraSketch> full_shards, heap_shards;
        for (int i = 0; i < 8; i++) {
            full_shards.emplace_back(cfg);
            heap_shards.emplace_back(cfg);
        }
        for (std::size_t i = 0; i < updates.size(); i++) {
            full_shards[i % 8].update_encoded(updates[i].first, updates[i].second);
            heap_shards[i % 8].update_encoded(updates[i].first, updates[i].second);
        }
        auto t0 = std::chrono::steady_clock::now();
        HydraSketch full = tree_merge(std::move(full_shards), MergeMode::full);
        auto t1 = std::chrono::steady_clock::now();
        HydraSketch heap = tree_merge(std::move(heap_shards), MergeMode::heap_only);
        auto t2 = std::chrono::steady_clock::now();
        out["merge"] = {
            {"full_ms", std::chrono::duration<double, std::milli>(t1 - t0).count()},
            {"heap_only_ms", std::chrono::duration<double, std::milli>(t2 - t1).count()},
            {"full_mean_abs_l1_error", mean_abs_l1_error(setup.store, full, 1e-3)},
            {"heap_only_mean_abs_l1_error", mean_abs_l1_error(setup.store, heap, 1e-3)}};
        std::cout << out.dump(2) << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
