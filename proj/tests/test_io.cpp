#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "hydra/io.hpp"
#include "hydra/oracle.hpp"
#include "hydra/workload.hpp"

using namespace hydra;
using Catch::Matchers::WithinAbs;

namespace {

HydraConfig io_config(std::uint64_t seed = 21) {
    HydraConfig cfg;
    cfg.r = 2;
    cfg.w = 8;
    cfg.r_cs = 3;
    cfg.w_cs = 256;
    cfg.L = 3;
    cfg.k = 32;
    cfg.stream_seed = seed;
    cfg.eps = 1.0 / cfg.w;
    cfg.delta = cfg.delta_us = 0.1;
    cfg.eps_us = 0.1;
    cfg.gmin_ratio = 1e-2;
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("hydra_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("workload generation") {
    SECTION("uniform alpha spreads counts evenly") {
        Workload wl = generate_workload({.subpopulations = 4, .alpha = 0.0, .records = 400,
                                         .metric_domain = 2, .seed = 1});
        std::uint64_t total = 0;
        for (auto c : wl.rank_counts) {
            CHECK(double(c) > 100 - 4 * std::sqrt(100.0 * 0.75));
            CHECK(double(c) < 100 + 4 * std::sqrt(100.0 * 0.75));
            total += c;
        }
        CHECK(total == 400);
    }
    SECTION("rank-1 share matches the analytic Zipf share within 2%") {
        WorkloadSpec spec{.subpopulations = 100, .alpha = 0.99, .records = 200000,
                          .metric_domain = 4, .seed = 3};
        Workload wl = generate_workload(spec);
        double analytic = zipf_share(100, 0.99, 0);
        double observed = double(wl.rank_counts[0]) / double(spec.records);
        CHECK(std::abs(observed - analytic) / analytic < 0.02);
    }
    SECTION("same seed gives byte-identical output") {
        TempDir dir;
        WorkloadSpec spec{.subpopulations = 10, .alpha = 0.7, .records = 1000, .metric_domain = 3,
                          .seed = 42};
        write_workload_csv(generate_workload(spec), dir.file("a.csv"));
        write_workload_csv(generate_workload(spec), dir.file("b.csv"));
        std::ifstream a(dir.file("a.csv")), b(dir.file("b.csv"));
        std::string sa((std::istreambuf_iterator<char>(a)), {});
        std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
        CHECK_FALSE(sa.empty());
    }
    SECTION("manifest counts sum to N exactly") {
        Workload wl = generate_workload({.subpopulations = 33, .alpha = 1.2, .records = 5555,
                                         .metric_domain = 5, .seed = 8});
        std::uint64_t total = 0;
        for (auto c : wl.rank_counts) total += c;
        CHECK(total == 5555);
    }
}

TEST_CASE("serialize round-trip") {
    SECTION("empty sketch") {
        HydraSketch hs(io_config());
        HydraSketch back = deserialize(serialize(hs));
        CHECK(back.query(SubpopulationKey({{0, "x"}}), {Statistic::l1}) == 0.0);
        CHECK(back.total_updates() == 0);
    }
    SECTION("after 10^4 updates every query is bit-identical") {
        HydraSketch hs(io_config());
        ExactStore store;
        Workload wl = generate_workload({.subpopulations = 60, .alpha = 0.9, .records = 2500,
                                         .metric_domain = 4, .seed = 10});
        for (const auto& rec : wl.records) {
            hs.ingest(rec);
            store.ingest(rec);
        }
        HydraSketch back = deserialize(serialize(hs));
        CHECK(back.total_updates() == hs.total_updates());
        for (const auto& enc : store.observed_subpops()) {
            for (auto s : {Statistic::l1, Statistic::l2, Statistic::cardinality, Statistic::entropy})
                CHECK(back.query_encoded(enc, {s}) == hs.query_encoded(enc, {s}));
        }
    }
    SECTION("flipping a payload byte fails the checksum") {
        HydraSketch hs(io_config());
        hs.update(SubpopulationKey({{0, "x"}}), "m");
        std::string bytes = serialize(hs);
        bytes[bytes.size() / 2] ^= 0x40;
        CHECK_THROWS_WITH(deserialize(bytes), Catch::Matchers::ContainsSubstring("checksum"));
    }
    SECTION("bad magic / version / family rejected") {
        HydraSketch hs(io_config());
        std::string bytes = serialize(hs);
        std::string wrong_magic = bytes;
        wrong_magic[0] = 'X';
        CHECK_THROWS_AS(deserialize(wrong_magic), Error);
    }
}

TEST_CASE("serialized size depends only on the configuration") {
    HydraConfig cfg = io_config();
    HydraSketch small(cfg), large(cfg);
    Workload a = generate_workload({.subpopulations = 10, .alpha = 0.9, .records = 500,
                                    .metric_domain = 3, .seed = 1});
    Workload b = generate_workload({.subpopulations = 1000, .alpha = 0.9, .records = 20000,
                                    .metric_domain = 3, .seed = 2});
    for (const auto& rec : a.records) small.ingest(rec);
    for (const auto& rec : b.records) large.ingest(rec);
    std::string sa = serialize(small), sb = serialize(large);
    CHECK(sa.size() == sb.size());
    CHECK(sa.size() == serialized_size(cfg));
}

TEST_CASE("csv ingestion") {
    TempDir dir;
    Workload wl = generate_workload({.subpopulations = 40, .alpha = 0.9, .records = 3000,
                                     .metric_domain = 4, .seed = 13});
    write_workload_csv(wl, dir.file("data.csv"));
    Schema schema = workload_schema();
    HydraConfig cfg = io_config();

    SECTION("1 shard vs 8 shards are query-identical") {
        auto one = ingest_csv(dir.file("data.csv"), schema, cfg, 1);
        auto eight = ingest_csv(dir.file("data.csv"), schema, cfg, 8);
        CHECK(one.rows_ingested == 3000);
        CHECK(eight.rows_ingested == 3000);
        ExactStore store;
        for (const auto& rec : wl.records) store.ingest(rec);
        for (const auto& enc : store.observed_subpops()) {
            for (auto s : {Statistic::l1, Statistic::l2, Statistic::cardinality})
                CHECK(one.sketch.query_encoded(enc, {s}) ==
                      eight.sketch.query_encoded(enc, {s}));
        }
    }

    SECTION("header-only file yields a valid empty sketch") {
        std::ofstream(dir.file("empty.csv")) << "d0,d1,metric\n";
        auto res = ingest_csv(dir.file("empty.csv"), schema, cfg, 4);
        CHECK(res.rows_ingested == 0);
        CHECK(res.sketch.query(SubpopulationKey({{0, "s0"}}), {Statistic::l1}) == 0.0);
    }

    SECTION("malformed rows are skipped and counted") {
        std::ofstream out(dir.file("bad.csv"));
        out << "d0,d1,metric\n";
        for (int i = 0; i < 500; i++) out << "s1,b1,m" << i % 3 << "\n";
        out << "not-enough-fields\n";
        for (int i = 0; i < 499; i++) out << "s2,b2,m" << i % 3 << "\n";
        out.close();
        auto res = ingest_csv(dir.file("bad.csv"), schema, cfg, 2);
        CHECK(res.rows_ingested == 999);
        CHECK(res.rows_skipped == 1);
    }

    SECTION("missing schema column is a data error") {
        std::ofstream(dir.file("cols.csv")) << "a,b,c\n1,2,3\n";
        CHECK_THROWS_AS(ingest_csv(dir.file("cols.csv"), schema, cfg, 1), Error);
    }

    SECTION("empty dimension fields map to the missing token") {
        std::ofstream(dir.file("gap.csv")) << "d0,d1,metric\ns1,,m0\n";
        auto res = ingest_csv(dir.file("gap.csv"), schema, cfg, 1);
        REQUIRE(res.rows_ingested == 1);
        SubpopulationKey sp({{1, schema.missing_token}});
        CHECK(res.sketch.query(sp, {Statistic::l1}) == 1.0);
    }
}

TEST_CASE("save and load through files") {
    TempDir dir;
    HydraSketch hs(io_config());
    hs.update(SubpopulationKey({{0, "x"}}), "m");
    save_sketch(hs, dir.file("s.hsk"));
    HydraSketch back = load_sketch(dir.file("s.hsk"));
    CHECK(back.query(SubpopulationKey({{0, "x"}}), {Statistic::l1}) == 1.0);
    CHECK_THROWS_AS(load_sketch(dir.file("missing.hsk")), Error);
}
