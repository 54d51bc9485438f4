#pragma once

// Shared scenario fixtures used across the test suites.

#include "dlfuzz/road_network.hpp"
#include "dlfuzz/scenario.hpp"
#include "dlfuzz/simulator.hpp"

namespace fixtures {

using namespace dlfuzz;

// Two through movements crossing at (5.25, -5.25) on M1 with near-equal
// arrival times; mutual yielding wedges both. The positive control.
inline Scenario canonical_m1() {
    Scenario s;
    s.map_id = MapId::M1;
    s.rng_seed = 7;
    s.avs.push_back({1, {5.25, -70.0}, {5.25, 70.0}, 0.0});
    s.avs.push_back({2, {-55.0, -5.25}, {70.0, -5.25}, 0.0});
    return s;
}

// Leader parks at a mid-lane destination, follower queues behind it on the
// same lane. Plain queueing: not a deadlock.
inline Scenario stopped_queue_m1() {
    Scenario s;
    s.map_id = MapId::M1;
    s.rng_seed = 3;
    s.avs.push_back({1, {5.25, -55.0}, {5.25, -20.0}, 0.0});
    s.avs.push_back({2, {5.25, -70.0}, {5.25, 70.0}, 0.0});
    return s;
}

// Three AVs entering the roundabout from south, east and north.
inline Scenario roundabout_trio() {
    const LaneGraph g = build_builtin_map(MapId::M3);
    const auto entry = [&](LaneId id) { return g.lane_by_id(id)->centerline.points().front(); };
    const auto exit = [&](LaneId id) { return g.lane_by_id(id)->centerline.points().back(); };
    Scenario s;
    s.map_id = MapId::M3;
    s.rng_seed = 5;
    s.avs.push_back({1, entry(5), exit(11), 0.0});
    s.avs.push_back({2, entry(6), exit(12), 0.0});
    s.avs.push_back({3, entry(7), exit(9), 0.0});
    return s;
}

inline SimConfig sim60() {
    SimConfig cfg;
    cfg.horizon = 60.0;
    return cfg;
}

}  // namespace fixtures
