#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "hydra/data_model.hpp"
#include "test_support.hpp"

using namespace hydra;

TEST_CASE("fanout produces the full power set in bitmask order") {
    SECTION("D = 1") {
        auto keys = fanout({{"NYC"}, "m"});
        REQUIRE(keys.size() == 2);
        CHECK(keys[0].whole_stream());
        CHECK(keys[1].predicates() ==
              std::vector<SubpopulationKey::Predicate>{{0, "NYC"}});
    }
    SECTION("D = 2") {
        auto keys = fanout({{"NYC", "AppleTV"}, "m"});
        REQUIRE(keys.size() == 4);
        CHECK(keys[0].whole_stream());
        CHECK(keys[1].predicates() == std::vector<SubpopulationKey::Predicate>{{0, "NYC"}});
        CHECK(keys[2].predicates() == std::vector<SubpopulationKey::Predicate>{{1, "AppleTV"}});
        CHECK(keys[3].predicates() ==
              std::vector<SubpopulationKey::Predicate>{{0, "NYC"}, {1, "AppleTV"}});
    }
    SECTION("dimensionality cap") {
        DataRecord rec;
        rec.dims.assign(21, "v");
        CHECK_THROWS_AS(fanout(rec), Error);
    }
}

TEST_CASE("fanout keys are distinct and decode back (D = 5)") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; trial++) {
        DataRecord rec;
        for (int d = 0; d < 5; d++) rec.dims.push_back(test::random_key(rng, 1, 6));
        auto keys = fanout(rec);
        REQUIRE(keys.size() == 32);
        std::set<std::string> encodings;
        for (const auto& k : keys) {
            std::string enc = k.encode();
            encodings.insert(enc);
            CHECK(SubpopulationKey::decode(enc) == k);
        }
        CHECK(encodings.size() == 32);
    }
}

TEST_CASE("encode_key canonical form") {
    CHECK(SubpopulationKey{}.encode() == std::string(1, '\0'));
    SubpopulationKey a({{2, "b"}, {0, "a"}});
    SubpopulationKey b({{0, "a"}, {2, "b"}});
    CHECK(a.encode() == b.encode());
    CHECK(a.predicates()[0].first == 0);  // canonical sort
}

TEST_CASE("decode rejects malformed bytes") {
    CHECK_THROWS_AS(SubpopulationKey::decode(""), Error);
    CHECK_THROWS_AS(SubpopulationKey::decode("\x01"), Error);               // truncated
    CHECK_THROWS_AS(SubpopulationKey::decode("\x01\x00\x05" "ab"), Error);  // short value
    std::string trailing = SubpopulationKey({{0, "x"}}).encode() + "junk";
    CHECK_THROWS_AS(SubpopulationKey::decode(trailing), Error);
    std::string dup("\x02\x01\x01x\x01\x01y", 7);  // dims not strictly increasing
    CHECK_THROWS_AS(SubpopulationKey::decode(dup), Error);
}

TEST_CASE("encode round-trip fuzz: 10^4 random predicate sets, no collisions") {
    std::mt19937_64 rng(17);
    std::set<std::string> encodings;
    std::set<std::string> reprs;
    for (int i = 0; i < 10000; i++) {
        std::uniform_int_distribution<int> count_dist(0, 6);
        int n = count_dist(rng);
        std::vector<SubpopulationKey::Predicate> preds;
        std::set<std::uint32_t> used;
        while (int(preds.size()) < n) {
            std::uint32_t dim = std::uint32_t(rng() % 20);
            if (!used.insert(dim).second) continue;
            preds.emplace_back(dim, test::random_key(rng, 0, 8));
        }
        SubpopulationKey key(std::move(preds));
        std::string enc = key.encode();
        CHECK(SubpopulationKey::decode(enc) == key);

        std::string repr;
        for (const auto& [d, v] : key.predicates())
            repr += std::to_string(d) + "\x1f" + v + "\x1e";
        bool new_key = reprs.insert(repr).second;
        bool new_enc = encodings.insert(enc).second;
        CHECK(new_key == new_enc);  // distinct keys <=> distinct encodings
    }
}

TEST_CASE("composite keys separate subpopulation and metric injectively") {
    SubpopulationKey sp({{0, "NYC"}});
    std::string enc = sp.encode();
    std::string c = make_composite_key(enc, "metric1");
    CHECK(composite_matches(c, enc));
    CHECK(composite_metric(c, enc) == "metric1");
    // A different subpopulation's prefix does not match.
    std::string other = SubpopulationKey({{0, "SFO"}}).encode();
    CHECK_FALSE(composite_matches(c, other));
    // Metric bytes cannot forge a longer subpopulation prefix.
    std::string tricky = make_composite_key(SubpopulationKey{}.encode(), enc + "x");
    CHECK_FALSE(composite_matches(tricky, enc));
    CHECK(composite_matches(tricky, SubpopulationKey{}.encode()));
}
