#include <catch2/catch.hpp>

#include <set>

#include "dlfuzz/conflict_feedback.hpp"
#include "dlfuzz/scenario_generation.hpp"
#include "dlfuzz/simulator.hpp"
#include "fixtures.hpp"

using namespace dlfuzz;

namespace {

ConflictRegion region_for(AgentId i, AgentId j, double ti, double vi, double tj, double vj) {
    ConflictRegion r;
    r.point = {5.25, -5.25};
    r.involved = {std::min(i, j), std::max(i, j)};
    r.arrivals[i] = {ti, vi};
    r.arrivals[j] = {tj, vj};
    return r;
}

std::vector<AVSpec> two_avs(double t1 = 0.0, double t2 = 0.0) {
    return {{1, {5.25, -70.0}, {5.25, 70.0}, t1}, {2, {-55.0, -5.25}, {70.0, -5.25}, t2}};
}

}  // namespace

TEST_CASE("temporal mutation applies the half-gap update") {
    SECTION("arrivals 20 and 14 with zero triggers") {
        SplitMix64 rng(1);
        const auto out = temporal_mutation(two_avs(), {region_for(1, 2, 20.0, 5.0, 14.0, 5.0)}, rng);
        REQUIRE(out.has_value());
        // delta = +-6 depending on the shuffled pair order
        const double t1 = (*out)[0].t_trigger;
        const double t2 = (*out)[1].t_trigger;
        const bool forward = t1 == Approx(0.0) && t2 == Approx(3.0);
        const bool swapped = t1 == Approx(3.0) && t2 == Approx(0.0);
        CHECK((forward || swapped));
    }
    SECTION("equal arrivals leave triggers unchanged") {
        SplitMix64 rng(2);
        const auto out = temporal_mutation(two_avs(4.0, 9.0), {region_for(1, 2, 15.0, 3.0, 15.0, 3.0)}, rng);
        REQUIRE(out.has_value());
        CHECK((*out)[0].t_trigger == Approx(4.0));
        CHECK((*out)[1].t_trigger == Approx(9.0));
    }
    SECTION("triggers 10/10 with gap 4 give 8 and 12") {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            SplitMix64 rng(seed);
            const auto out =
                temporal_mutation(two_avs(10.0, 10.0), {region_for(1, 2, 20.0, 5.0, 16.0, 5.0)}, rng);
            REQUIRE(out.has_value());
            const double t1 = (*out)[0].t_trigger;
            const double t2 = (*out)[1].t_trigger;
            CHECK(std::fmin(t1, t2) == Approx(8.0));
            CHECK(std::fmax(t1, t2) == Approx(12.0));
        }
    }
    SECTION("no regions yields no mutation") {
        SplitMix64 rng(3);
        CHECK_FALSE(temporal_mutation(two_avs(), {}, rng).has_value());
    }
    SECTION("only triggers change") {
        SplitMix64 rng(4);
        const auto avs = two_avs(3.0, 5.0);
        const auto out = temporal_mutation(avs, {region_for(1, 2, 18.0, 2.0, 12.0, 2.0)}, rng);
        REQUIRE(out.has_value());
        REQUIRE(out->size() == avs.size());
        for (std::size_t i = 0; i < avs.size(); ++i) {
            CHECK((*out)[i].id == avs[i].id);
            CHECK((*out)[i].p_start == avs[i].p_start);
            CHECK((*out)[i].p_dest == avs[i].p_dest);
        }
    }
    SECTION("the implied arrival gap shrinks by the full delta") {
        SplitMix64 rng(5);
        const double ti = 22.0, tj = 14.0;
        const auto out = temporal_mutation(two_avs(10.0, 10.0), {region_for(1, 2, ti, 1.0, tj, 1.0)}, rng);
        REQUIRE(out.has_value());
        // unclamped: each side moves delta/2 toward the other
        const double gap = std::fabs(((*out)[0].t_trigger + ti) - ((*out)[1].t_trigger + tj));
        CHECK(gap == Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("generate dispatch follows the feedback score") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    Scenario parent;
    parent.map_id = MapId::M1;
    parent.rng_seed = 1;
    parent.avs = two_avs();

    SECTION("no regions forces the spatial path") {
        SplitMix64 rng(1);
        const auto out = generate(parent, 0.2, {}, g, rng);
        CHECK(out.operator_used == "spatial");
    }
    SECTION("phi 0 with regions always keeps the temporal result") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            SplitMix64 rng(seed);
            const auto out = generate(parent, 0.0, {region_for(1, 2, 20.0, 5.0, 14.0, 5.0)}, g, rng);
            CHECK(out.operator_used == "temporal");
        }
    }
    SECTION("phi 1 always goes spatial") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            SplitMix64 rng(seed);
            const auto out = generate(parent, 1.0, {region_for(1, 2, 20.0, 5.0, 14.0, 5.0)}, g, rng);
            CHECK(out.operator_used == "spatial");
        }
    }
    SECTION("children carry fresh seeds and validate") {
        SplitMix64 rng(9);
        const auto out = generate(parent, 0.5, {region_for(1, 2, 20.0, 5.0, 14.0, 5.0)}, g, rng);
        CHECK(out.scenario.rng_seed != parent.rng_seed);
        CHECK(validate(out.scenario, g).empty());
    }
}

TEST_CASE("spatial mutation respects the capacity bounds") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    GenConfig cfg;
    // six AVs at capacity
    std::vector<AVSpec> avs = {
        {1, {5.25, -70.0}, {5.25, 70.0}, 0.0},   {2, {-70.0, -5.25}, {70.0, -5.25}, 2.0},
        {3, {-5.25, 70.0}, {-5.25, -70.0}, 4.0}, {4, {70.0, 5.25}, {-70.0, 5.25}, 6.0},
        {5, {1.75, -70.0}, {-70.0, 1.75}, 8.0},  {6, {-1.75, 70.0}, {70.0, -1.75}, 10.0},
    };
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SplitMix64 rng(seed);
        const auto [out, npcs] = spatial_mutation(avs, {}, g, {}, rng, cfg);
        REQUIRE(out.size() >= 3);
        REQUIRE(out.size() <= cfg.max_avs);
        (void)npcs;
    }
}

TEST_CASE("spatial mutation appends one candidate below capacity") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    GenConfig cfg;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SplitMix64 rng(seed);
        const auto [out, npcs] = spatial_mutation(two_avs(), {}, g, {}, rng, cfg);
        CHECK(out.size() == 3);
        CHECK(out[2].id == 3);
        (void)npcs;
    }
}

TEST_CASE("local search keeps the argmin candidate") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    GenConfig cfg;
    cfg.local_search_budget = 5;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SplitMix64 rng(seed);
        const auto search = local_search_candidate(g, two_avs(), {}, 3, rng, cfg);
        REQUIRE_FALSE(search.scores.empty());
        for (double s : search.scores) REQUIRE(search.best_score <= s + 1e-12);
    }
}

TEST_CASE("best-of-n candidates cross existing routes more often than single draws") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const std::vector<AVSpec> avs = {{1, {5.25, -70.0}, {5.25, 70.0}, 0.0},
                                     {2, {1.75, -55.0}, {-70.0, 1.75}, 0.0}};
    GenConfig searched;
    searched.local_search_budget = 20;
    GenConfig single;
    single.local_search_budget = 1;

    int searched_cross = 0, single_cross = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        SplitMix64 rng_a(1000 + trial);
        SplitMix64 rng_b(1000 + trial);
        const auto a = local_search_candidate(g, avs, {}, 3, rng_a, searched);
        const auto b = local_search_candidate(g, avs, {}, 3, rng_b, single);
        if (a.best_score < 1.0 - 1e-12) ++searched_cross;
        if (b.best_score < 1.0 - 1e-12) ++single_cross;
    }
    CHECK(searched_cross > single_cross);
    CHECK(searched_cross > 80);  // best-of-21 nearly always finds a crossing
}

TEST_CASE("offline spatial estimate") {
    SECTION("parallel mainline routes on m4 score 1") {
        const LaneGraph g = build_builtin_map(MapId::M4);
        const std::vector<AVSpec> avs = {{1, {-150.0, 3.5}, {150.0, 3.5}, 0.0},
                                         {2, {-150.0, 0.0}, {150.0, 0.0}, 0.0}};
        CHECK(estimate_spatial_score_offline(g, avs) == Approx(1.0));
    }
    SECTION("crossing m1 movements score below 1, matching brute force") {
        const LaneGraph g = build_builtin_map(MapId::M1);
        const auto avs = two_avs();
        const double score = estimate_spatial_score_offline(g, avs);
        CHECK(score < 1.0);
        // independent count: both planned routes, all segment pairs
        const Route r1 = plan_route(g, avs[0].p_start, avs[0].p_dest);
        const Route r2 = plan_route(g, avs[1].p_start, avs[1].p_dest);
        std::size_t k = 0;
        const auto& p1 = r1.points.points();
        const auto& p2 = r2.points.points();
        for (std::size_t i = 0; i + 1 < p1.size(); ++i)
            for (std::size_t j = 0; j + 1 < p2.size(); ++j)
                if (segment_intersection({p1[i], p1[i + 1]}, {p2[j], p2[j + 1]})) ++k;
        const auto denom = static_cast<double>((p1.size() - 1) + (p2.size() - 1));
        CHECK(score == Approx(1.0 - static_cast<double>(k) / denom).margin(1e-12));
    }
    SECTION("a single AV scores 1") {
        const LaneGraph g = build_builtin_map(MapId::M1);
        CHECK(estimate_spatial_score_offline(g, {{1, {5.25, -70.0}, {5.25, 70.0}, 0.0}}) == Approx(1.0));
    }
    SECTION("unroutable pairs raise NoRoute") {
        const LaneGraph g = build_builtin_map(MapId::M1);
        CHECK_THROWS_AS(
            estimate_spatial_score_offline(g, {{1, {5.25, -70.0}, {-70.0, -5.25}, 0.0}}),
            NoRouteError);
    }
}

TEST_CASE("waypoint mutator") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    GenConfig cfg;
    SECTION("empty in, empty out") {
        SplitMix64 rng(1);
        CHECK(waypoint_mutator({}, {}, g, rng, cfg).empty());
    }
    SECTION("jitters stay within bounds and on lane") {
        NpcSpec npc;
        npc.id = 1001;
        for (int k = 0; k <= 10; ++k)
            npc.waypoints.push_back({{5.25, -70.0 + 5.0 * k}, M_PI / 2.0, 6.0});
        SplitMix64 rng(2);
        const auto out = waypoint_mutator({npc}, {}, g, rng, cfg);
        REQUIRE(out.size() == 1);
        REQUIRE(out[0].waypoints.size() == npc.waypoints.size());
        for (std::size_t k = 0; k < npc.waypoints.size(); ++k) {
            const Waypoint& w = out[0].waypoints[k];
            CHECK(distance(w.p, npc.waypoints[k].p) <= cfg.waypoint_pos_jitter + 0.5);
            CHECK(std::fabs(w.v - npc.waypoints[k].v) <= cfg.waypoint_speed_jitter + 1e-9);
            CHECK(w.v >= 0.0);
            // projected back onto a lane centerline
            CHECK(g.nearest_lane(w.p).lateral <= 0.1);
        }
    }
    SECTION("waypoints near a conflict region are left untouched") {
        NpcSpec npc;
        npc.id = 1001;
        for (int k = 0; k <= 10; ++k)
            npc.waypoints.push_back({{5.25, -70.0 + 5.0 * k}, M_PI / 2.0, 6.0});
        ConflictRegion region;
        region.point = {5.25, -45.0};  // 5 m from waypoint index 5
        region.involved = {1, 2};
        region.arrivals[1] = {1, 1};
        region.arrivals[2] = {1, 1};
        SplitMix64 rng(3);
        const auto out = waypoint_mutator({npc}, {region}, g, rng, cfg);
        const Waypoint& w5 = out[0].waypoints[5];
        CHECK(w5.p == npc.waypoints[5].p);
        CHECK(w5.v == npc.waypoints[5].v);
    }
}
