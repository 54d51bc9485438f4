#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/road_network.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

using json = nlohmann::json;

namespace io {

inline const json& require(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) throw ParseError(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(path + "." + key, "missing field");
    return *it;
}

inline double require_number(const json& j, const char* key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_number()) throw ParseError(path + "." + key, "expected a number");
    return v.get<double>();
}

inline Vec2 parse_point(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ParseError(path, "expected [x, y]");
    return {v[0].get<double>(), v[1].get<double>()};
}

inline json point_json(Vec2 p) { return json::array({p.x, p.y}); }

}  // namespace io

// ---------------------------------------------------------------------------
// Scenario <-> JSON
// schema: {map_id, rng_seed, avs:[{id, p_start:[x,y], p_dest:[x,y], t_trigger}],
//          npcs:[{id, waypoints:[{p:[x,y], theta, v}]}]}
// ---------------------------------------------------------------------------

inline json scenario_to_json(const Scenario& s) {
    json j;
    j["map_id"] = map_id_name(s.map_id);
    j["rng_seed"] = s.rng_seed;
    json avs = json::array();
    for (const AVSpec& av : s.avs) {
        avs.push_back({{"id", av.id},
                       {"p_start", io::point_json(av.p_start)},
                       {"p_dest", io::point_json(av.p_dest)},
                       {"t_trigger", av.t_trigger}});
    }
    j["avs"] = std::move(avs);
    json npcs = json::array();
    for (const NpcSpec& npc : s.npcs) {
        json wps = json::array();
        for (const Waypoint& w : npc.waypoints)
            wps.push_back({{"p", io::point_json(w.p)}, {"theta", w.theta}, {"v", w.v}});
        npcs.push_back({{"id", npc.id}, {"waypoints", std::move(wps)}});
    }
    j["npcs"] = std::move(npcs);
    return j;
}

inline Scenario scenario_from_json(const json& j) {
    Scenario s;
    const json& map_id = io::require(j, "map_id", "scenario");
    if (!map_id.is_string()) throw ParseError("scenario.map_id", "expected a string");
    s.map_id = map_id_from_name(map_id.get<std::string>());
    const json& seed = io::require(j, "rng_seed", "scenario");
    if (!seed.is_number()) throw ParseError("scenario.rng_seed", "expected an integer");
    s.rng_seed = seed.get<std::uint64_t>();

    const json& avs = io::require(j, "avs", "scenario");
    if (!avs.is_array()) throw ParseError("scenario.avs", "expected an array");
    for (std::size_t i = 0; i < avs.size(); ++i) {
        const std::string path = "scenario.avs[" + std::to_string(i) + "]";
        const json& a = avs[i];
        AVSpec av;
        av.id = static_cast<AgentId>(io::require_number(a, "id", path));
        av.p_start = io::parse_point(io::require(a, "p_start", path), path + ".p_start");
        av.p_dest = io::parse_point(io::require(a, "p_dest", path), path + ".p_dest");
        av.t_trigger = io::require_number(a, "t_trigger", path);
        s.avs.push_back(av);
    }
    const json& npcs = io::require(j, "npcs", "scenario");
    if (!npcs.is_array()) throw ParseError("scenario.npcs", "expected an array");
    for (std::size_t i = 0; i < npcs.size(); ++i) {
        const std::string path = "scenario.npcs[" + std::to_string(i) + "]";
        const json& n = npcs[i];
        NpcSpec npc;
        npc.id = static_cast<AgentId>(io::require_number(n, "id", path));
        const json& wps = io::require(n, "waypoints", path);
        if (!wps.is_array()) throw ParseError(path + ".waypoints", "expected an array");
        for (std::size_t k = 0; k < wps.size(); ++k) {
            const std::string wpath = path + ".waypoints[" + std::to_string(k) + "]";
            const json& w = wps[k];
            Waypoint wp;
            wp.p = io::parse_point(io::require(w, "p", wpath), wpath + ".p");
            wp.theta = io::require_number(w, "theta", wpath);
            wp.v = io::require_number(w, "v", wpath);
            npc.waypoints.push_back(wp);
        }
        s.npcs.push_back(npc);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Observation <-> JSON (per-agent states keyed by agent id, mirroring
// AgentState field names p/theta/v/a)
// ---------------------------------------------------------------------------

inline json observation_to_json(const Observation& o) {
    json j;
    j["map_id"] = map_id_name(o.map_id);
    j["dt"] = o.dt;
    j["av_ids"] = o.av_ids;
    j["collision_flag"] = o.collision_flag;
    if (o.collided_pair)
        j["collided_pair"] = json::array({o.collided_pair->first, o.collided_pair->second});
    else
        j["collided_pair"] = nullptr;
    json scenes = json::array();
    for (const Scene& scene : o.scenes) {
        json sj = json::object();
        for (const auto& [id, st] : scene) {
            sj[std::to_string(id)] = {{"p", io::point_json(st.p)}, {"theta", st.theta}, {"v", st.v}, {"a", st.a}};
        }
        scenes.push_back(std::move(sj));
    }
    j["scenes"] = std::move(scenes);
    return j;
}

inline Observation observation_from_json(const json& j) {
    Observation o;
    const json& map_id = io::require(j, "map_id", "observation");
    if (!map_id.is_string()) throw ParseError("observation.map_id", "expected a string");
    o.map_id = map_id_from_name(map_id.get<std::string>());
    o.dt = io::require_number(j, "dt", "observation");
    const json& ids = io::require(j, "av_ids", "observation");
    if (!ids.is_array()) throw ParseError("observation.av_ids", "expected an array");
    for (const json& v : ids) o.av_ids.push_back(v.get<AgentId>());
    const json& flag = io::require(j, "collision_flag", "observation");
    if (!flag.is_boolean()) throw ParseError("observation.collision_flag", "expected a boolean");
    o.collision_flag = flag.get<bool>();
    auto cp = j.find("collided_pair");
    if (cp != j.end() && !cp->is_null()) {
        if (!cp->is_array() || cp->size() != 2) throw ParseError("observation.collided_pair", "expected [i, j]");
        o.collided_pair = {{(*cp)[0].get<AgentId>(), (*cp)[1].get<AgentId>()}};
    }
    const json& scenes = io::require(j, "scenes", "observation");
    if (!scenes.is_array()) throw ParseError("observation.scenes", "expected an array");
    for (std::size_t k = 0; k < scenes.size(); ++k) {
        const std::string path = "observation.scenes[" + std::to_string(k) + "]";
        const json& sj = scenes[k];
        if (!sj.is_object()) throw ParseError(path, "expected an object");
        Scene scene;
        for (auto it = sj.begin(); it != sj.end(); ++it) {
            const std::string apath = path + "." + it.key();
            AgentState st;
            st.p = io::parse_point(io::require(it.value(), "p", apath), apath + ".p");
            st.theta = io::require_number(it.value(), "theta", apath);
            st.v = io::require_number(it.value(), "v", apath);
            st.a = io::require_number(it.value(), "a", apath);
            scene[static_cast<AgentId>(std::stoul(it.key()))] = st;
        }
        o.scenes.push_back(std::move(scene));
    }
    return o;
}

// ---------------------------------------------------------------------------
// Custom map loading
// schema: {lanes:[{id, centerline:[[x,y],...], speed_limit}],
//          connectivity:{"id":[ids]}, spawn_points:[[x,y,heading],...]}
// ---------------------------------------------------------------------------

inline LaneGraph lane_graph_from_json(const json& j) {
    LaneGraph g;
    g.map_id = MapId::Custom;
    const json& lanes = io::require(j, "lanes", "map");
    if (!lanes.is_array()) throw ParseError("map.lanes", "expected an array");
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        const std::string path = "map.lanes[" + std::to_string(i) + "]";
        const json& lj = lanes[i];
        Lane lane;
        lane.id = static_cast<LaneId>(io::require_number(lj, "id", path));
        lane.speed_limit = io::require_number(lj, "speed_limit", path);
        const json& cl = io::require(lj, "centerline", path);
        if (!cl.is_array() || cl.size() < 2) throw ParseError(path + ".centerline", "expected >= 2 points");
        std::vector<Vec2> pts;
        for (std::size_t k = 0; k < cl.size(); ++k)
            pts.push_back(io::parse_point(cl[k], path + ".centerline[" + std::to_string(k) + "]"));
        lane.centerline = Polyline{std::move(pts)};
        const Vec2 t = lane.centerline.tangent_at(0.0);
        lane.direction_tag = std::atan2(t.y, t.x);
        g.lanes.push_back(std::move(lane));
    }
    std::sort(g.lanes.begin(), g.lanes.end(), [](const Lane& a, const Lane& b) { return a.id < b.id; });
    auto conn = j.find("connectivity");
    if (conn != j.end()) {
        if (!conn->is_object()) throw ParseError("map.connectivity", "expected an object");
        for (auto it = conn->begin(); it != conn->end(); ++it) {
            std::vector<LaneId> succ;
            for (const json& v : it.value()) succ.push_back(v.get<LaneId>());
            std::sort(succ.begin(), succ.end());
            g.connectivity[static_cast<LaneId>(std::stoul(it.key()))] = std::move(succ);
        }
    }
    auto sps = j.find("spawn_points");
    if (sps != j.end()) {
        for (std::size_t i = 0; i < sps->size(); ++i) {
            const json& v = (*sps)[i];
            if (!v.is_array() || v.size() != 3)
                throw ParseError("map.spawn_points[" + std::to_string(i) + "]", "expected [x, y, heading]");
            g.spawn_points.push_back({{v[0].get<double>(), v[1].get<double>()}, v[2].get<double>()});
        }
    }
    const auto problems = validate_lane_graph(g);
    if (!problems.empty()) throw ParseError("map", problems.front());
    return g;
}

inline json lane_graph_to_json(const LaneGraph& g) {
    json j;
    json lanes = json::array();
    for (const Lane& lane : g.lanes) {
        json cl = json::array();
        for (const Vec2& p : lane.centerline.points()) cl.push_back(io::point_json(p));
        lanes.push_back({{"id", lane.id}, {"centerline", std::move(cl)}, {"speed_limit", lane.speed_limit}});
    }
    j["lanes"] = std::move(lanes);
    json conn = json::object();
    for (const auto& [from, succ] : g.connectivity) conn[std::to_string(from)] = succ;
    j["connectivity"] = std::move(conn);
    json sps = json::array();
    for (const SpawnPoint& sp : g.spawn_points)
        sps.push_back(json::array({sp.position.x, sp.position.y, sp.heading}));
    j["spawn_points"] = std::move(sps);
    return j;
}

}  // namespace dlfuzz
