#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/geometry.hpp"

namespace dlfuzz {

using LaneId = std::uint32_t;

enum class MapId { M1, M2, M3, M4, Custom };

inline std::string map_id_name(MapId m) {
    switch (m) {
        case MapId::M1: return "m1";
        case MapId::M2: return "m2";
        case MapId::M3: return "m3";
        case MapId::M4: return "m4";
        default: return "custom";
    }
}

inline MapId map_id_from_name(const std::string& s) {
    if (s == "m1") return MapId::M1;
    if (s == "m2") return MapId::M2;
    if (s == "m3") return MapId::M3;
    if (s == "m4") return MapId::M4;
    if (s == "custom") return MapId::Custom;
    throw ParseError("map_id", "unknown map id '" + s + "'");
}

struct Lane {
    LaneId id = 0;
    Polyline centerline;
    double direction_tag = 0.0;  // heading at lane start, radians
    double speed_limit = 8.0;
};

struct SpawnPoint {
    Vec2 position;
    double heading = 0.0;
};

struct Route {
    std::vector<LaneId> lane_sequence;
    Polyline points;
    double total_length = 0.0;
    // arc position at which each lane of the sequence ends, same order
    std::vector<double> lane_end_arcs;
};

class LaneGraph {
public:
    MapId map_id = MapId::Custom;
    std::vector<Lane> lanes;  // ascending id
    std::map<LaneId, std::vector<LaneId>> connectivity;
    std::vector<SpawnPoint> spawn_points;

    const Lane* lane_by_id(LaneId id) const {
        auto it = std::lower_bound(lanes.begin(), lanes.end(), id,
                                   [](const Lane& l, LaneId v) { return l.id < v; });
        return (it != lanes.end() && it->id == id) ? &*it : nullptr;
    }

    const std::vector<LaneId>& successors(LaneId id) const {
        static const std::vector<LaneId> none;
        auto it = connectivity.find(id);
        return it != connectivity.end() ? it->second : none;
    }

    struct LaneHit {
        LaneId lane = 0;
        double arc = 0.0;
        double lateral = 0.0;
    };

    /// Nearest lane to a point; ties resolve to the smallest lane id.
    LaneHit nearest_lane(Vec2 p) const {
        LaneHit best;
        best.lateral = std::numeric_limits<double>::infinity();
        for (const Lane& lane : lanes) {
            const auto proj = lane.centerline.project(p);
            if (proj.lateral < best.lateral - 1e-9) {
                best = {lane.id, proj.arc, proj.lateral};
            }
        }
        return best;
    }

    /// Lane ids reachable from `from` (inclusive) under connectivity.
    std::vector<LaneId> reachable_from(LaneId from) const {
        std::set<LaneId> seen{from};
        std::vector<LaneId> stack{from};
        while (!stack.empty()) {
            const LaneId u = stack.back();
            stack.pop_back();
            for (LaneId v : successors(u)) {
                if (seen.insert(v).second) stack.push_back(v);
            }
        }
        return {seen.begin(), seen.end()};
    }

    /// Terminal lanes (no successors) reachable from `from`; their endpoints
    /// are the natural destination set for scenario sampling.
    std::vector<LaneId> reachable_terminals(LaneId from) const {
        std::vector<LaneId> out;
        for (LaneId id : reachable_from(from)) {
            if (successors(id).empty()) out.push_back(id);
        }
        return out;
    }
};

/// Structural invariant check; returns human-readable problems (empty = ok).
inline std::vector<std::string> validate_lane_graph(const LaneGraph& g) {
    std::vector<std::string> problems;
    std::set<LaneId> ids;
    for (const Lane& lane : g.lanes) {
        if (!ids.insert(lane.id).second)
            problems.push_back("duplicate lane id " + std::to_string(lane.id));
        if (lane.centerline.size() < 2)
            problems.push_back("lane " + std::to_string(lane.id) + " has < 2 centerline points");
        const auto& pts = lane.centerline.points();
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (distance(pts[i], pts[i + 1]) <= 1e-12)
                problems.push_back("lane " + std::to_string(lane.id) + " has duplicate points");
        }
    }
    for (const auto& [from, succs] : g.connectivity) {
        const Lane* a = g.lane_by_id(from);
        if (!a) {
            problems.push_back("connectivity references unknown lane " + std::to_string(from));
            continue;
        }
        for (LaneId to : succs) {
            const Lane* b = g.lane_by_id(to);
            if (!b) {
                problems.push_back("connectivity references unknown lane " + std::to_string(to));
                continue;
            }
            if (distance(a->centerline.points().back(), b->centerline.points().front()) > 0.5)
                problems.push_back("lanes " + std::to_string(from) + "->" + std::to_string(to) +
                                   " are not end-to-start contiguous");
        }
    }
    for (const SpawnPoint& sp : g.spawn_points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Lane& lane : g.lanes) best = std::fmin(best, lane.centerline.project(sp.position).lateral);
        if (best > 1.0) problems.push_back("spawn point off-lane");
    }
    return problems;
}

namespace detail {

constexpr double kLaneWidth = 3.5;
constexpr double kBoxHalf = 10.0;       // half of the 20 m intersection box
constexpr double kApproachLen = 60.0;
constexpr double kRoundaboutR = 15.0;
constexpr double kRampAngleDeg = 15.0;

inline Vec2 rot90(Vec2 p, int k) {
    k = ((k % 4) + 4) % 4;
    switch (k) {
        case 1: return {-p.y, p.x};
        case 2: return {-p.x, -p.y};
        case 3: return {p.y, -p.x};
        default: return p;
    }
}

inline std::vector<Vec2> arc_points(Vec2 center, double radius, double a0, double a1, int steps) {
    std::vector<Vec2> out;
    out.reserve(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const double a = a0 + (a1 - a0) * static_cast<double>(i) / steps;
        out.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
    }
    return out;
}

inline Lane make_lane(LaneId id, std::vector<Vec2> pts, double limit) {
    std::vector<Vec2> clean;
    for (const Vec2& p : pts) {
        if (clean.empty() || distance(clean.back(), p) > 1e-9) clean.push_back(p);
    }
    Lane lane;
    lane.id = id;
    lane.centerline = Polyline{std::move(clean)};
    lane.speed_limit = limit;
    const Vec2 t = lane.centerline.tangent_at(0.0);
    lane.direction_tag = std::atan2(t.y, t.x);
    return lane;
}

// Full turning movement through the intersection box: straight approach,
// circular junction arc, straight exit, expressed in the frame of an
// approach that enters heading +y, then rotated into place.
enum class Turn { Left, Through, Right };

inline std::vector<Vec2> movement_points(Turn turn, double approach_offset, double exit_offset) {
    std::vector<Vec2> pts;
    const double y0 = -(kBoxHalf + kApproachLen);
    switch (turn) {
        case Turn::Through: {
            pts.push_back({approach_offset, y0});
            pts.push_back({approach_offset, kBoxHalf + kApproachLen});
            break;
        }
        case Turn::Left: {
            // quarter arc, counter-clockwise, exiting heading -x
            const Vec2 c{-kBoxHalf, -kBoxHalf};
            const double r = approach_offset - c.x;
            pts.push_back({approach_offset, y0});
            auto arc = arc_points(c, r, 0.0, M_PI / 2.0, 12);
            pts.insert(pts.end(), arc.begin(), arc.end());
            pts.push_back({-(kBoxHalf + kApproachLen), exit_offset});
            break;
        }
        case Turn::Right: {
            // quarter arc, clockwise, exiting heading +x
            const Vec2 c{kBoxHalf, -kBoxHalf};
            const double r = c.x - approach_offset;
            pts.push_back({approach_offset, y0});
            auto arc = arc_points(c, r, M_PI, M_PI / 2.0, 8);
            pts.insert(pts.end(), arc.begin(), arc.end());
            pts.push_back({kBoxHalf + kApproachLen, exit_offset});
            break;
        }
    }
    return pts;
}

inline void add_movement_spawns(LaneGraph& g, const Lane& lane, std::initializer_list<double> arcs) {
    for (double s : arcs) {
        SpawnPoint sp;
        sp.position = lane.centerline.point_at(s);
        sp.heading = lane.centerline.heading_at(s);
        g.spawn_points.push_back(sp);
    }
}

inline LaneGraph build_m1() {
    LaneGraph g;
    g.map_id = MapId::M1;
    const double kUrban = 8.0;
    const double inner = kLaneWidth / 2.0;        // 1.75: left-turn lane
    const double mid = kLaneWidth * 1.5;          // 5.25: through lane
    const double outer = kLaneWidth * 2.5;        // 8.75: right-turn lane
    LaneId id = 1;
    for (int approach = 0; approach < 4; ++approach) {
        const auto rotate = [&](std::vector<Vec2> pts) {
            for (Vec2& p : pts) p = rot90(p, approach);
            return pts;
        };
        g.lanes.push_back(make_lane(id++, rotate(movement_points(Turn::Left, inner, inner)), kUrban));
        g.lanes.push_back(make_lane(id++, rotate(movement_points(Turn::Through, mid, mid)), kUrban));
        g.lanes.push_back(make_lane(id++, rotate(movement_points(Turn::Right, outer, -outer)), kUrban));
    }
    for (const Lane& lane : g.lanes) add_movement_spawns(g, lane, {0.0, 15.0});
    return g;
}

inline LaneGraph build_m2() {
    LaneGraph g;
    g.map_id = MapId::M2;
    const double kUrban = 8.0;
    const double inner = kLaneWidth / 2.0;
    const double mid = kLaneWidth * 1.5;
    LaneId id = 1;
    const double far = kBoxHalf + kApproachLen;

    // west approach, heading +x: through + right turn into the south stem
    g.lanes.push_back(make_lane(id++, {{-far, -inner}, {far, -inner}}, kUrban));
    {
        std::vector<Vec2> pts{{-far, -mid}, {-kBoxHalf, -mid}};
        auto arc = arc_points({-kBoxHalf, -mid - 4.75}, 4.75, M_PI / 2.0, 0.0, 8);
        pts.insert(pts.end(), arc.begin(), arc.end());
        pts.push_back({-kBoxHalf + 4.75, -far});
        g.lanes.push_back(make_lane(id++, std::move(pts), kUrban));
    }
    // east approach, heading -x: through + left turn into the south stem
    g.lanes.push_back(make_lane(id++, {{far, mid}, {-far, mid}}, kUrban));
    {
        std::vector<Vec2> pts{{far, inner}, {kBoxHalf, inner}};
        auto arc = arc_points({kBoxHalf, inner - 11.75}, 11.75, M_PI / 2.0, M_PI, 12);
        pts.insert(pts.end(), arc.begin(), arc.end());
        pts.push_back({kBoxHalf - 11.75, -far});
        g.lanes.push_back(make_lane(id++, std::move(pts), kUrban));
    }
    // south approach, heading +y: left to west + right merging east
    {
        std::vector<Vec2> pts{{inner, -far}, {inner, -kBoxHalf}};
        auto arc = arc_points({inner - 11.75, -kBoxHalf}, 11.75, 0.0, M_PI / 2.0, 12);
        pts.insert(pts.end(), arc.begin(), arc.end());
        pts.push_back({-far, -kBoxHalf + 11.75});
        g.lanes.push_back(make_lane(id++, std::move(pts), kUrban));
    }
    {
        std::vector<Vec2> pts{{mid, -far}};
        auto arc = arc_points({mid + 4.75, -kBoxHalf}, 4.75, M_PI, M_PI / 2.0, 8);
        pts.insert(pts.end(), arc.begin(), arc.end());
        pts.push_back({far, -kBoxHalf + 4.75});
        g.lanes.push_back(make_lane(id++, std::move(pts), kUrban));
    }
    for (const Lane& lane : g.lanes) add_movement_spawns(g, lane, {0.0, 15.0});
    return g;
}

inline LaneGraph build_m3() {
    LaneGraph g;
    g.map_id = MapId::M3;
    const double ring_limit = 6.0;
    const double leg_limit = 8.0;
    const double r = kRoundaboutR;
    // ring nodes at compass angles; circulation is counter-clockwise
    const double node_angle[4] = {-M_PI / 2.0, 0.0, M_PI / 2.0, M_PI};

    // lanes 1..4: ring arcs node_k -> node_{k+1}
    for (int k = 0; k < 4; ++k) {
        auto pts = arc_points({0, 0}, r, node_angle[k], node_angle[k] + M_PI / 2.0, 15);
        g.lanes.push_back(make_lane(static_cast<LaneId>(1 + k), std::move(pts), ring_limit));
    }
    // lanes 5..8: entries, lanes 9..12: exits
    for (int k = 0; k < 4; ++k) {
        const Vec2 node{r * std::cos(node_angle[k]), r * std::sin(node_angle[k])};
        const Vec2 out_radial{std::cos(node_angle[k]), std::sin(node_angle[k])};
        const Vec2 ccw_tangent{-std::sin(node_angle[k]), std::cos(node_angle[k])};
        // entry approaches against the circulation side, exit leaves with it
        const Vec2 entry_start = node + 22.0 * out_radial + (-14.0) * ccw_tangent;
        const Vec2 exit_end = node + 22.0 * out_radial + 14.0 * ccw_tangent;
        g.lanes.push_back(make_lane(static_cast<LaneId>(5 + k), {entry_start, node}, leg_limit));
        g.lanes.push_back(make_lane(static_cast<LaneId>(9 + k), {node, exit_end}, leg_limit));
    }
    std::sort(g.lanes.begin(), g.lanes.end(), [](const Lane& a, const Lane& b) { return a.id < b.id; });
    for (int k = 0; k < 4; ++k) {
        const LaneId arc = static_cast<LaneId>(1 + k);
        const LaneId next_arc = static_cast<LaneId>(1 + (k + 1) % 4);
        const LaneId exit_at_next = static_cast<LaneId>(9 + (k + 1) % 4);
        g.connectivity[arc] = {next_arc, exit_at_next};
        g.connectivity[static_cast<LaneId>(5 + k)] = {arc};
    }
    for (int k = 0; k < 4; ++k) {
        const Lane* entry = g.lane_by_id(static_cast<LaneId>(5 + k));
        add_movement_spawns(g, *entry, {0.0, 10.0});
    }
    return g;
}

inline LaneGraph build_m4() {
    LaneGraph g;
    g.map_id = MapId::M4;
    const double main_limit = 20.0;
    const double ramp_limit = 12.0;
    const double half_len = 150.0;
    const Vec2 merge{30.0, 0.0};

    // 1: inner mainline, 2: outer mainline before merge, 3: outer after merge
    g.lanes.push_back(make_lane(1, {{-half_len, kLaneWidth}, {half_len, kLaneWidth}}, main_limit));
    g.lanes.push_back(make_lane(2, {{-half_len, 0.0}, {merge.x, 0.0}}, main_limit));
    g.lanes.push_back(make_lane(3, {{merge.x, 0.0}, {half_len, 0.0}}, main_limit));

    // 4: merge ramp. The approach runs at the ramp angle, overshoots the
    // outer centerline once (the merge crossing), and settles back onto it.
    {
        const double ang = kRampAngleDeg * M_PI / 180.0;
        const Vec2 over{merge.x - 9.0, 0.5};
        const Vec2 start{over.x - 55.0 * std::cos(ang), over.y - 55.0 * std::sin(ang)};
        std::vector<Vec2> pts;
        for (int i = 0; i <= 11; ++i) {
            const double t = static_cast<double>(i) / 11.0;
            pts.push_back(start + t * (over - start));
        }
        pts.push_back({merge.x - 5.0, 0.25});
        pts.push_back({merge.x - 2.5, 0.06});
        pts.push_back({merge.x - 2.0, 0.0});
        pts.push_back(merge);
        g.lanes.push_back(make_lane(4, std::move(pts), ramp_limit));
    }
    g.connectivity[2] = {3};
    g.connectivity[4] = {3};

    add_movement_spawns(g, *g.lane_by_id(1), {0.0, 60.0});
    add_movement_spawns(g, *g.lane_by_id(2), {0.0, 60.0});
    add_movement_spawns(g, *g.lane_by_id(4), {0.0, 20.0});
    return g;
}

}  // namespace detail

/// Fixed, versioned construction of the four built-in map regions.
inline LaneGraph build_builtin_map(MapId id) {
    switch (id) {
        case MapId::M1: return detail::build_m1();
        case MapId::M2: return detail::build_m2();
        case MapId::M3: return detail::build_m3();
        case MapId::M4: return detail::build_m4();
        default: throw ConfigError("build_builtin_map: custom maps are loaded, not built");
    }
}

/// Minimum-length lane route between two on-lane points.
///
/// Same-lane destinations at or behind the start resolve to the remainder
/// of the lane. The route polyline is the covered centerline portion,
/// subdivided to <= 1 m segments with vertices preserved.
inline Route plan_route(const LaneGraph& graph, Vec2 start, Vec2 dest) {
    const auto s_hit = graph.nearest_lane(start);
    const auto d_hit = graph.nearest_lane(dest);
    if (s_hit.lateral > 1.0) throw NoRouteError("start is not within 1 m of any lane");
    if (d_hit.lateral > 1.0) throw NoRouteError("destination is not within 1 m of any lane");

    const auto finish = [](std::vector<LaneId> seq, Polyline pts, std::vector<double> portions) {
        Route r;
        r.lane_sequence = std::move(seq);
        r.points = pts.resample(1.0);
        r.total_length = r.points.length();
        double acc = 0.0;
        for (double len : portions) {
            acc += len;
            r.lane_end_arcs.push_back(acc);
        }
        if (!r.lane_end_arcs.empty()) r.lane_end_arcs.back() = r.total_length;
        return r;
    };

    if (s_hit.lane == d_hit.lane) {
        const Lane* lane = graph.lane_by_id(s_hit.lane);
        const double end = d_hit.arc > s_hit.arc + 1e-9 ? d_hit.arc : lane->centerline.length();
        return finish({s_hit.lane}, lane->centerline.slice(s_hit.arc, end), {end - s_hit.arc});
    }

    // Dijkstra over lanes. Entering lane v costs its full length, except the
    // destination lane which costs the prefix up to the destination point.
    // Ties settle in ascending lane-id order.
    std::map<LaneId, double> dist;
    std::map<LaneId, LaneId> parent;
    std::set<LaneId> settled;
    using QEntry = std::pair<double, LaneId>;
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> pq;

    const Lane* start_lane = graph.lane_by_id(s_hit.lane);
    dist[s_hit.lane] = start_lane->centerline.length() - s_hit.arc;
    pq.push({dist[s_hit.lane], s_hit.lane});

    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (!settled.insert(u).second) continue;
        if (u == d_hit.lane) break;
        for (LaneId v : graph.successors(u)) {
            if (settled.count(v)) continue;
            const Lane* lv = graph.lane_by_id(v);
            const double step = (v == d_hit.lane) ? d_hit.arc : lv->centerline.length();
            const double cand = d + step;
            auto it = dist.find(v);
            if (it == dist.end() || cand < it->second - 1e-12) {
                dist[v] = cand;
                parent[v] = u;
                pq.push({cand, v});
            }
        }
    }

    if (!settled.count(d_hit.lane)) throw NoRouteError("destination unreachable from start");

    std::vector<LaneId> seq{d_hit.lane};
    while (seq.back() != s_hit.lane) seq.push_back(parent.at(seq.back()));
    std::reverse(seq.begin(), seq.end());

    std::vector<double> portions;
    Polyline pts = graph.lane_by_id(seq.front())->centerline.slice(s_hit.arc,
                                                                   graph.lane_by_id(seq.front())->centerline.length());
    portions.push_back(pts.length());
    for (std::size_t i = 1; i + 1 < seq.size(); ++i) {
        const Lane* lane = graph.lane_by_id(seq[i]);
        pts.append(lane->centerline.slice(0.0, lane->centerline.length()));
        portions.push_back(lane->centerline.length());
    }
    pts.append(graph.lane_by_id(seq.back())->centerline.slice(0.0, d_hit.arc));
    portions.push_back(d_hit.arc);
    return finish(std::move(seq), std::move(pts), std::move(portions));
}

}  // namespace dlfuzz
