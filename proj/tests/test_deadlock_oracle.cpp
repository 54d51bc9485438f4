#include <catch2/catch.hpp>

#include <set>

#include "dlfuzz/deadlock_oracle.hpp"
#include "dlfuzz/fuzzer.hpp"
#include "dlfuzz/rng.hpp"
#include "dlfuzz/simulator.hpp"
#include "fixtures.hpp"

using namespace dlfuzz;

namespace {

Observation flat_speed_obs(const std::vector<double>& speeds, double dt = 0.1) {
    Observation obs;
    obs.dt = dt;
    obs.av_ids = {1};
    for (std::size_t k = 0; k < speeds.size(); ++k) {
        Scene s;
        s[1] = {{0.0, 0.0}, 0.0, speeds[k], 0.0};
        obs.scenes.push_back(s);
    }
    return obs;
}

PredictedTrajectory ray(Vec2 origin, Vec2 vel, double t0, int n, double dt = 0.1) {
    PredictedTrajectory out;
    for (int k = 0; k <= n; ++k) {
        const double tau = dt * k;
        out.samples.push_back({t0 + tau, origin + tau * vel});
    }
    return out;
}

// brute-force conflict oracle: plain double loop over all sample pairs
bool conflict_brute(const PredictedTrajectory& a, const PredictedTrajectory& b, double tau_eps,
                    double d_eps) {
    for (const auto& pa : a.samples)
        for (const auto& pb : b.samples)
            if (std::fabs(pa.t - pb.t) <= tau_eps && distance(pa.p, pb.p) <= d_eps) return true;
    return false;
}

// cycle existence via transitive closure, independent of detect_cycle
bool has_cycle_floyd(const WaitForGraph& g) {
    std::vector<AgentId> verts = g.vertices;
    const std::size_t n = verts.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    const auto idx = [&](AgentId id) {
        return static_cast<std::size_t>(std::find(verts.begin(), verts.end(), id) - verts.begin());
    };
    for (const auto& [a, b] : g.edges) reach[idx(a)][idx(b)] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    for (std::size_t i = 0; i < n; ++i)
        if (reach[i][i]) return true;
    return false;
}

}  // namespace

TEST_CASE("phi_stop window semantics") {
    OracleConfig cfg;
    SECTION("all samples below the threshold") {
        CHECK(phi_stop(flat_speed_obs(std::vector<double>(80, 0.005)), 1, 6.0, cfg));
    }
    SECTION("one moving sample breaks the window") {
        std::vector<double> speeds(80, 0.005);
        speeds[40] = 0.5;
        CHECK_FALSE(phi_stop(flat_speed_obs(speeds), 1, 6.0, cfg));
    }
    SECTION("the threshold itself is not stationary (strict <)") {
        CHECK_FALSE(phi_stop(flat_speed_obs(std::vector<double>(80, 0.01)), 1, 6.0, cfg));
    }
    SECTION("window must fit the observation") {
        const auto obs = flat_speed_obs(std::vector<double>(80, 0.0));
        CHECK_THROWS_AS(phi_stop(obs, 1, 3.0, cfg), WindowOutOfRangeError);
        CHECK_THROWS_AS(phi_stop(obs, 1, 100.0, cfg), WindowOutOfRangeError);
        CHECK_THROWS_AS(phi_stop(obs, 9, 6.0, cfg), UnknownAgentError);
    }
}

TEST_CASE("trajectories_conflict space-time overlap") {
    OracleConfig cfg;  // tau_eps 2, d_eps 2.5
    const auto a = ray({0, 0}, {5, 0}, 0.0, 50);
    SECTION("identical trajectories conflict") { CHECK(trajectories_conflict(a, a, cfg)); }
    SECTION("parallel lines 10 m apart never conflict") {
        const auto b = ray({0, 10}, {5, 0}, 0.0, 50);
        CHECK_FALSE(trajectories_conflict(a, b, cfg));
    }
    SECTION("crossing paths 3 s apart in time do not conflict") {
        // both cross (12.5, 0); a arrives at t=2.5, b at t=5.5
        const auto b = ray({12.5, -15.0}, {0, 5}, 2.5, 50);
        CHECK_FALSE(trajectories_conflict(a, b, cfg));
        CHECK(trajectories_conflict(a, b, cfg) == conflict_brute(a, b, cfg.tau_eps, cfg.d_eps));
        // shifting b 3 s earlier creates the conflict
        auto c = b;
        for (auto& tp : c.samples) tp.t -= 3.0;
        CHECK(trajectories_conflict(a, c, cfg));
        CHECK(conflict_brute(a, c, cfg.tau_eps, cfg.d_eps));
    }
    SECTION("agreement with the brute-force scan on random rays") {
        SplitMix64 rng(31);
        for (int trial = 0; trial < 200; ++trial) {
            const auto x = ray({rng.uniform(-20, 20), rng.uniform(-20, 20)},
                               {rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(0, 10), 40);
            const auto y = ray({rng.uniform(-20, 20), rng.uniform(-20, 20)},
                               {rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(0, 10), 40);
            REQUIRE(trajectories_conflict(x, y, cfg) == conflict_brute(x, y, cfg.tau_eps, cfg.d_eps));
        }
    }
}

TEST_CASE("wait_for_edge on the canonical fixture") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const Observation obs = simulate(fixtures::canonical_m1(), g, "conservative_yield", fixtures::sim60());
    const OracleVerdict v = evaluate(obs);
    REQUIRE(v.t_detect.has_value());
    const double t = *v.t_detect;
    CHECK(wait_for_edge(obs, 1, 2, t));
    CHECK(wait_for_edge(obs, 2, 1, t));
    CHECK_FALSE(wait_for_edge(obs, 1, 1, t));
}

TEST_CASE("same-lane queueing is not a wait-for edge") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const Observation obs = simulate(fixtures::stopped_queue_m1(), g, "conservative_yield", fixtures::sim60());
    // probe while the pre-stop windows still cover real motion
    const double t = 15.0;
    REQUIRE(phi_stop(obs, 1, t));
    REQUIRE(phi_stop(obs, 2, t));
    CHECK_FALSE(wait_for_edge(obs, 1, 2, t));
    CHECK_FALSE(wait_for_edge(obs, 2, 1, t));
}

TEST_CASE("a moving agent has no outgoing edges") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    Scenario s = fixtures::canonical_m1();
    s.avs[1].t_trigger = 25.0;  // second AV arrives long after the first cleared
    const Observation obs = simulate(s, g, "conservative_yield", fixtures::sim60());
    // at t = 6 s the first AV is mid-cruise
    CHECK_FALSE(wait_for_edge(obs, 1, 2, 6.0));
}

TEST_CASE("build_wait_for_graph shapes") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    SECTION("canonical fixture grows the mutual pair") {
        const Observation obs =
            simulate(fixtures::canonical_m1(), g, "conservative_yield", fixtures::sim60());
        const OracleVerdict v = evaluate(obs);
        REQUIRE(v.t_detect.has_value());
        const WaitForGraph wf = build_wait_for_graph(obs, *v.t_detect);
        CHECK(wf.has_edge(1, 2));
        CHECK(wf.has_edge(2, 1));
        for (const auto& [a, b] : wf.edges) REQUIRE(a != b);
    }
    SECTION("all agents moving yields no edges") {
        const Observation obs =
            simulate(fixtures::canonical_m1(), g, "conservative_yield", fixtures::sim60());
        CHECK(build_wait_for_graph(obs, 6.0).edges.empty());
    }
    SECTION("single AV yields no pairs") {
        Observation obs;
        obs.dt = 0.1;
        obs.av_ids = {1};
        for (int k = 0; k < 80; ++k) {
            Scene sc;
            sc[1] = {{0, 0}, 0, 0.0, 0};
            obs.scenes.push_back(sc);
        }
        CHECK(build_wait_for_graph(obs, 6.0).edges.empty());
    }
}

TEST_CASE("detect_cycle fixtures") {
    WaitForGraph g;
    g.vertices = {1, 2, 3};
    SECTION("two-cycle") {
        g.edges = {{1, 2}, {2, 1}};
        const auto cycle = detect_cycle(g);
        REQUIRE(cycle.has_value());
        CHECK(*cycle == std::vector<AgentId>{1, 2});
    }
    SECTION("dag") {
        g.edges = {{1, 2}, {2, 3}};
        CHECK_FALSE(detect_cycle(g).has_value());
    }
    SECTION("smallest cycle wins deterministically") {
        g.vertices = {1, 2, 3, 4};
        g.edges = {{3, 4}, {4, 3}, {1, 2}, {2, 1}};
        CHECK(*detect_cycle(g) == std::vector<AgentId>{1, 2});
    }
}

TEST_CASE("detect_cycle matches exhaustive reachability on random digraphs") {
    SplitMix64 rng(47);
    for (int trial = 0; trial < 1000; ++trial) {
        WaitForGraph g;
        const int n = 2 + static_cast<int>(rng.uniform_index(7));  // up to 8 vertices
        for (int i = 0; i < n; ++i) g.vertices.push_back(static_cast<AgentId>(i + 1));
        const double p = rng.uniform(0.05, 0.4);
        for (AgentId a : g.vertices)
            for (AgentId b : g.vertices)
                if (a != b && rng.next_double() < p) g.edges.insert({a, b});
        const auto cycle = detect_cycle(g);
        REQUIRE(cycle.has_value() == has_cycle_floyd(g));
        if (cycle) {
            // the reported cycle is a real closed walk in the graph
            for (std::size_t k = 0; k < cycle->size(); ++k)
                REQUIRE(g.has_edge((*cycle)[k], (*cycle)[(k + 1) % cycle->size()]));
        }
    }
}

TEST_CASE("evaluate verdicts on the fixture pair") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const Scenario s = fixtures::canonical_m1();

    const Observation cy = simulate(s, g, "conservative_yield", fixtures::sim60());
    const OracleVerdict fail = evaluate(cy);
    REQUIRE(fail.outcome == Outcome::Fail);
    REQUIRE(fail.cycle.has_value());
    CHECK(*fail.cycle == std::vector<AgentId>{1, 2});
    REQUIRE(fail.t_detect.has_value());
    // detection lands within 10 s of both AVs being stopped after driving
    double both_stopped_at = -1.0;
    bool moved1 = false, moved2 = false;
    for (std::size_t k = 0; k < cy.scenes.size(); ++k) {
        moved1 = moved1 || cy.scenes[k].at(1).v > 1.0;
        moved2 = moved2 || cy.scenes[k].at(2).v > 1.0;
        if (moved1 && moved2 && cy.scenes[k].at(1).v < 0.01 && cy.scenes[k].at(2).v < 0.01) {
            both_stopped_at = 0.1 * static_cast<double>(k);
            break;
        }
    }
    REQUIRE(both_stopped_at >= 0.0);
    CHECK(*fail.t_detect <= both_stopped_at + 10.0);
    CHECK_FALSE(fail.graphs.empty());

    const Observation pt = simulate(s, g, "priority_tiebreak", fixtures::sim60());
    CHECK(evaluate(pt).outcome == Outcome::Pass);

    Observation collided = cy;
    collided.collision_flag = true;
    CHECK_THROWS_AS(evaluate(collided), CollidedObservationError);
}

TEST_CASE("edge sets shrink monotonically in eps_v") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const Observation obs = simulate(fixtures::canonical_m1(), g, "conservative_yield", fixtures::sim60());
    OracleConfig small, large;
    small.eps_v = 0.002;
    large.eps_v = 0.05;
    for (double t = 5.0; t <= obs.end_time(); t += 5.0) {
        const auto e1 = build_wait_for_graph(obs, t, small).edges;
        const auto e2 = build_wait_for_graph(obs, t, large).edges;
        for (const auto& e : e1) REQUIRE(e2.count(e) == 1);
    }
}

TEST_CASE("verdicts are label equivariant") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const Observation obs = simulate(fixtures::canonical_m1(), g, "conservative_yield", fixtures::sim60());

    // relabel AV 1 -> 9, 2 -> 4
    const auto relabel = [](AgentId id) -> AgentId { return id == 1 ? 9 : id == 2 ? 4 : id; };
    Observation renamed = obs;
    renamed.av_ids = {4, 9};
    for (Scene& scene : renamed.scenes) {
        Scene out;
        for (const auto& [id, st] : scene) out[relabel(id)] = st;
        scene = std::move(out);
    }
    const OracleVerdict a = evaluate(obs);
    const OracleVerdict b = evaluate(renamed);
    REQUIRE(a.outcome == Outcome::Fail);
    REQUIRE(b.outcome == Outcome::Fail);
    std::set<AgentId> mapped;
    for (AgentId id : *a.cycle) mapped.insert(relabel(id));
    CHECK(mapped == std::set<AgentId>(b.cycle->begin(), b.cycle->end()));
}

TEST_CASE("naive stuck timer separates from the wait-for oracle on queues") {
    const LaneGraph g = build_builtin_map(MapId::M1);
    const Observation obs =
        simulate(fixtures::stopped_queue_m1(), g, "conservative_yield", fixtures::sim60());
    CHECK(evaluate(obs).outcome == Outcome::Pass);
    CHECK(naive_timer_evaluate(obs).outcome == Outcome::Fail);
}
