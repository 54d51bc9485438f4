#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/geometry.hpp"
#include "dlfuzz/road_network.hpp"

namespace dlfuzz {

using AgentId = std::uint32_t;

struct AVSpec {
    AgentId id = 0;
    Vec2 p_start;
    Vec2 p_dest;
    double t_trigger = 0.0;
};

struct Waypoint {
    Vec2 p;
    double theta = 0.0;
    double v = 0.0;
};

struct NpcSpec {
    AgentId id = 0;
    std::vector<Waypoint> waypoints;
};

struct Scenario {
    MapId map_id = MapId::M1;
    std::vector<AVSpec> avs;
    std::vector<NpcSpec> npcs;
    std::uint64_t rng_seed = 0;
};

struct AgentState {
    Vec2 p;
    double theta = 0.0;
    double v = 0.0;
    double a = 0.0;
};

using Scene = std::map<AgentId, AgentState>;

struct Observation {
    MapId map_id = MapId::M1;
    double dt = 0.1;
    std::vector<AgentId> av_ids;  // ascending; scenes also hold NPC states
    std::vector<Scene> scenes;
    bool collision_flag = false;
    std::optional<std::pair<AgentId, AgentId>> collided_pair;

    double end_time() const { return scenes.empty() ? 0.0 : dt * static_cast<double>(scenes.size() - 1); }

    const AgentState& state_at(std::size_t scene_idx, AgentId id) const {
        const Scene& scene = scenes.at(scene_idx);
        auto it = scene.find(id);
        if (it == scene.end()) throw UnknownAgentError("agent " + std::to_string(id) + " not in scene");
        return it->second;
    }

    bool has_agent(AgentId id) const {
        return !scenes.empty() && scenes.front().count(id) > 0;
    }
};

// Scenario-level constraints shared by validation and generation.
constexpr double kMinSpawnSeparation = 5.0;
constexpr double kMaxWaypointSpeed = 30.0;
constexpr double kSpawnSnapRadius = 1.0;

struct Violation {
    enum class Kind {
        TooFewAVs,
        TooManyAVs,
        SpawnOverlap,
        DuplicateAgentId,
        TriggerNegative,
        StartEqualsDest,
        StartOffSpawn,
        DestOffMap,
        BadWaypointCount,
        SpeedOutOfRange,
    };
    Kind kind;
    AgentId agent = 0;
    std::string message;
};

inline std::string violation_kind_name(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::TooFewAVs: return "TooFewAVs";
        case Violation::Kind::TooManyAVs: return "TooManyAVs";
        case Violation::Kind::SpawnOverlap: return "SpawnOverlap";
        case Violation::Kind::DuplicateAgentId: return "DuplicateAgentId";
        case Violation::Kind::TriggerNegative: return "TriggerNegative";
        case Violation::Kind::StartEqualsDest: return "StartEqualsDest";
        case Violation::Kind::StartOffSpawn: return "StartOffSpawn";
        case Violation::Kind::DestOffMap: return "DestOffMap";
        case Violation::Kind::BadWaypointCount: return "BadWaypointCount";
        case Violation::Kind::SpeedOutOfRange: return "SpeedOutOfRange";
    }
    return "?";
}

/// All invariant violations of a scenario against its map; empty means valid.
inline std::vector<Violation> validate(const Scenario& scenario, const LaneGraph& graph,
                                       std::size_t max_avs = 6) {
    std::vector<Violation> out;
    using K = Violation::Kind;

    if (scenario.avs.size() < 2)
        out.push_back({K::TooFewAVs, 0, "scenario needs at least 2 AVs"});
    if (scenario.avs.size() > max_avs)
        out.push_back({K::TooManyAVs, 0,
                       std::to_string(scenario.avs.size()) + " AVs exceeds capacity " + std::to_string(max_avs)});

    std::map<AgentId, int> id_count;
    std::vector<std::pair<AgentId, Vec2>> spawns;
    for (const AVSpec& av : scenario.avs) {
        ++id_count[av.id];
        spawns.push_back({av.id, av.p_start});
        if (av.t_trigger < 0.0)
            out.push_back({K::TriggerNegative, av.id, "negative trigger time"});
        if (av.p_start == av.p_dest)
            out.push_back({K::StartEqualsDest, av.id, "start equals destination"});
        double nearest_spawn = std::numeric_limits<double>::infinity();
        for (const SpawnPoint& sp : graph.spawn_points)
            nearest_spawn = std::fmin(nearest_spawn, distance(sp.position, av.p_start));
        if (nearest_spawn > kSpawnSnapRadius)
            out.push_back({K::StartOffSpawn, av.id, "start not within 1 m of a spawn point"});
        if (graph.nearest_lane(av.p_dest).lateral > kSpawnSnapRadius)
            out.push_back({K::DestOffMap, av.id, "destination not within 1 m of a lane"});
    }
    for (const NpcSpec& npc : scenario.npcs) {
        ++id_count[npc.id];
        if (npc.waypoints.size() < 2) {
            out.push_back({K::BadWaypointCount, npc.id, "NPC needs at least 2 waypoints"});
        } else {
            spawns.push_back({npc.id, npc.waypoints.front().p});
        }
        for (const Waypoint& w : npc.waypoints) {
            if (w.v < 0.0 || w.v > kMaxWaypointSpeed)
                out.push_back({K::SpeedOutOfRange, npc.id, "waypoint speed outside [0, 30]"});
        }
    }
    for (const auto& [id, n] : id_count) {
        if (n > 1) out.push_back({K::DuplicateAgentId, id, "agent id used " + std::to_string(n) + " times"});
    }
    for (std::size_t i = 0; i < spawns.size(); ++i) {
        for (std::size_t j = i + 1; j < spawns.size(); ++j) {
            if (distance(spawns[i].second, spawns[j].second) < kMinSpawnSeparation)
                out.push_back({K::SpawnOverlap, spawns[i].first,
                               "agents " + std::to_string(spawns[i].first) + " and " +
                                   std::to_string(spawns[j].first) + " spawn closer than 5 m"});
        }
    }
    return out;
}

struct TrajectoryPoint {
    double t = 0.0;
    Vec2 p;
    double v = 0.0;
};

/// Time-stamped polyline of an agent with consecutive duplicate positions
/// collapsed; a stationary stretch contributes its first sample only.
inline std::vector<TrajectoryPoint> av_trajectory(const Observation& obs, AgentId av) {
    if (!obs.has_agent(av)) throw UnknownAgentError("agent " + std::to_string(av) + " not in observation");
    std::vector<TrajectoryPoint> out;
    for (std::size_t k = 0; k < obs.scenes.size(); ++k) {
        const AgentState& st = obs.state_at(k, av);
        if (!out.empty() && distance(out.back().p, st.p) <= 1e-12) continue;
        out.push_back({obs.dt * static_cast<double>(k), st.p, st.v});
    }
    return out;
}

}  // namespace dlfuzz
