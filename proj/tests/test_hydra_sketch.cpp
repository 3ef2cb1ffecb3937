#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hydra/hydra_sketch.hpp"
#include "hydra/io.hpp"
#include "hydra/oracle.hpp"
#include "hydra/workload.hpp"
#include "test_support.hpp"

using namespace hydra;
using Catch::Matchers::WithinAbs;

namespace {

HydraConfig small_exact_config(std::uint64_t seed = 11) {
    // Sized so per-cell structures are effectively exact on small streams.
    HydraConfig cfg;
    cfg.r = 3;
    cfg.w = 16;
    cfg.r_cs = 3;
    cfg.w_cs = 1024;
    cfg.L = 4;
    cfg.k = 256;
    cfg.stream_seed = seed;
    cfg.eps = 1.0 / cfg.w;
    cfg.delta = 0.1;
    cfg.eps_us = 0.1;
    cfg.delta_us = 0.1;
    cfg.gmin_ratio = 1e-2;
    return cfg;
}

}  // namespace

TEST_CASE("w = 1 degenerates to replicated whole-stream sketches") {
    HydraConfig cfg = small_exact_config();
    cfg.w = 1;
    HydraSketch hs(cfg);
    for (const auto& enc : {std::string("x"), std::string("y"), std::string("z")})
        CHECK(hs.place(enc) == std::vector<std::uint32_t>(cfg.r, 0));
}

TEST_CASE("placement is deterministic and consistent across update and query") {
    HydraConfig cfg = small_exact_config();
    HydraSketch hs(cfg);
    SubpopulationKey sp({{0, "NYC"}});
    auto cols = hs.place(sp.encode());
    CHECK(cols == hs.place(sp.encode()));
    CHECK(cols.size() == cfg.r);

    hs.update(sp, "a");
    hs.update(sp, "a");
    // the same r cells were updated twice
    std::uint64_t touched = 0;
    for (std::uint32_t i = 0; i < cfg.r; i++)
        touched += hs.cell(i, cols[i]).update_count();
    CHECK(touched == 2 * cfg.r);
}

TEST_CASE("per-row ingested counts equal total updates") {
    HydraConfig cfg = small_exact_config();
    HydraSketch hs(cfg);
    std::mt19937_64 rng(3);
    std::uint64_t n = 0;
    for (int i = 0; i < 2000; i++) {
        SubpopulationKey sp({{0, "s" + std::to_string(rng() % 100)}});
        hs.update(sp, "m" + std::to_string(rng() % 5));
        n++;
    }
    CHECK(hs.total_updates() == n);
    for (std::uint32_t i = 0; i < cfg.r; i++) {
        std::uint64_t row_total = 0;
        for (std::uint32_t j = 0; j < cfg.w; j++) row_total += hs.cell(i, j).update_count();
        CHECK(row_total == n);
    }
}

TEST_CASE("query on a never-ingested subpopulation returns zero") {
    HydraSketch hs(small_exact_config());
    SubpopulationKey ghost({{0, "nowhere"}});
    CHECK(hs.query(ghost, {Statistic::l1}) == 0.0);
    CHECK(hs.query(ghost, {Statistic::cardinality}) == 0.0);
    CHECK(hs.query(ghost, {Statistic::entropy}) == 0.0);
}

TEST_CASE("single-subpopulation stream statistics") {
    HydraSketch hs(small_exact_config());
    SubpopulationKey sp({{0, "only"}});
    for (int i = 0; i < 2; i++) hs.update(sp, "a");
    for (int i = 0; i < 3; i++) hs.update(sp, "b");

    CHECK_THAT(hs.query(sp, {Statistic::l1}), WithinAbs(5.0, 1e-9));
    CHECK_THAT(hs.query(sp, {Statistic::l2}), WithinAbs(13.0, 1e-9));
    CHECK_THAT(hs.query(sp, {Statistic::cardinality}), WithinAbs(2.0, 1e-9));
    CHECK_THAT(hs.query(sp, {Statistic::entropy}), WithinAbs(0.97095, 1e-4));
}

TEST_CASE("heavy hitters within a subpopulation") {
    HydraSketch hs(small_exact_config());
    SubpopulationKey sp({{0, "pop"}});
    for (int i = 0; i < 90; i++) hs.update(sp, "a");
    for (int i = 0; i < 10; i++) hs.update(sp, "b");

    auto hh = hs.heavy_hitters(sp, 0.5);
    REQUIRE(hh.size() == 1);
    CHECK(hh[0].first == "a");
    CHECK_THAT(hh[0].second, WithinAbs(90.0, 1e-9));
    CHECK(hs.heavy_hitters(sp, 0.99).empty());
}

TEST_CASE("candidate filtering separates colliding subpopulations") {
    // Force collisions with w = 1: every subpopulation shares each cell.
    HydraConfig cfg = small_exact_config();
    cfg.w = 1;
    HydraSketch hs(cfg);
    SubpopulationKey sp1({{0, "one"}});
    SubpopulationKey sp2({{0, "two"}});
    for (int i = 0; i < 50; i++) hs.update(sp1, "a");
    for (int i = 0; i < 70; i++) hs.update(sp2, "b");

    CHECK_THAT(hs.query(sp1, {Statistic::l1}), WithinAbs(50.0, 1e-9));
    CHECK_THAT(hs.query(sp2, {Statistic::l1}), WithinAbs(70.0, 1e-9));
    CHECK_THAT(hs.query(sp1, {Statistic::cardinality}), WithinAbs(1.0, 1e-9));
}

TEST_CASE("FULL merge identities across the grid") {
    HydraConfig cfg = small_exact_config();
    std::mt19937_64 rng(17);
    auto make_stream = [&](int n) {
        std::vector<std::pair<SubpopulationKey, std::string>> stream;
        for (int i = 0; i < n; i++)
            stream.emplace_back(SubpopulationKey({{0, "s" + std::to_string(rng() % 40)}}),
                                "m" + std::to_string(rng() % 6));
        return stream;
    };

    SECTION("merge with a fresh sketch is query-identical") {
        HydraSketch a(cfg), fresh(cfg);
        auto stream = make_stream(1500);
        for (const auto& [sp, m] : stream) a.update(sp, m);
        double before = a.query(SubpopulationKey({{0, "s1"}}), {Statistic::l1});
        a.merge(fresh, MergeMode::full);
        CHECK(a.query(SubpopulationKey({{0, "s1"}}), {Statistic::l1}) == before);
    }

    SECTION("random split merge equals single pass on every query") {
        auto stream = make_stream(2000);
        HydraSketch whole(cfg), left(cfg), right(cfg);
        std::size_t cut = rng() % stream.size();
        for (std::size_t i = 0; i < stream.size(); i++) {
            whole.update(stream[i].first, stream[i].second);
            (i < cut ? left : right).update(stream[i].first, stream[i].second);
        }
        left.merge(right, MergeMode::full);
        for (int s = 0; s < 40; s++) {
            SubpopulationKey sp({{0, "s" + std::to_string(s)}});
            for (auto stat : {Statistic::l1, Statistic::l2, Statistic::cardinality})
                CHECK(left.query(sp, {stat}) == whole.query(sp, {stat}));
        }
    }

    SECTION("8-way split: balanced tree vs left-deep chain") {
        auto stream = make_stream(2400);
        std::vector<HydraSketch> tree_shards, chain_shards;
        for (int i = 0; i < 8; i++) {
            tree_shards.emplace_back(cfg);
            chain_shards.emplace_back(cfg);
        }
        for (std::size_t i = 0; i < stream.size(); i++) {
            tree_shards[i % 8].update(stream[i].first, stream[i].second);
            chain_shards[i % 8].update(stream[i].first, stream[i].second);
        }
        // balanced tree
        HydraSketch tree = tree_merge(std::move(tree_shards));
        // left-deep chain
        HydraSketch chain = std::move(chain_shards[0]);
        for (int i = 1; i < 8; i++) chain.merge(chain_shards[i], MergeMode::full);
        for (int s = 0; s < 40; s++) {
            SubpopulationKey sp({{0, "s" + std::to_string(s)}});
            for (auto stat : {Statistic::l1, Statistic::l2, Statistic::cardinality})
                CHECK(tree.query(sp, {stat}) == chain.query(sp, {stat}));
        }
    }

    SECTION("incompatible sketches rejected") {
        HydraSketch a(cfg);
        HydraConfig other = cfg;
        other.stream_seed = cfg.stream_seed + 1;
        HydraSketch b(other);
        CHECK_THROWS_AS(a.merge(b, MergeMode::full), Error);
    }
}

TEST_CASE("median of rows: r = 1 equals the single cell estimate") {
    HydraConfig cfg = small_exact_config();
    cfg.r = 1;
    HydraSketch hs(cfg);
    SubpopulationKey sp({{0, "solo"}});
    for (int i = 0; i < 7; i++) hs.update(sp, "x");
    auto cols = hs.place(sp.encode());
    CHECK(hs.query(sp, {Statistic::l1}) ==
          hs.cell(0, cols[0]).estimate_gsum({Statistic::l1}, sp.encode()));
}

TEST_CASE("error band holds empirically on a planner-configured sketch") {
    // Desk-scale version of the coverage experiment: Zipf(0.99), planner
    // config, >= 85% of qualifying subpopulations inside the band.
    WorkloadSpec spec{.subpopulations = 200, .alpha = 0.99, .records = 20000,
                      .metric_domain = 6, .seed = 5};
    Workload wl = generate_workload(spec);

    auto cfg = plan({.delta = 0.1, .eps_us = 0.1, .gmin_ratio = 2e-3, .n_us = 2.0,
                     .stream_seed = 77});
    HydraSketch hs(cfg);
    ExactStore store;
    for (const auto& rec : wl.records) {
        hs.ingest(rec);
        store.ingest(rec);
    }
    auto rep = evaluate_statistic(store, hs, {Statistic::l1}, 2e-3);
    REQUIRE(rep.qualifying > 10);
    CHECK(rep.coverage >= 0.85);
}

TEST_CASE("oversized key rejected") {
    HydraConfig cfg = small_exact_config();
    cfg.max_key_bytes = 8;
    HydraSketch hs(cfg);
    CHECK_THROWS_AS(hs.update(SubpopulationKey({{0, "way-too-long-value"}}), "m"), Error);
}
