#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/geometry.hpp"
#include "dlfuzz/road_network.hpp"
#include "dlfuzz/rng.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

struct SimConfig {
    double dt = 0.1;
    double horizon = 90.0;
    double collision_distance = 2.0;
    double stationary_timeout = 20.0;  // early stop once ALL agents sit still this long
};

struct PolicyCommand {
    double target_accel = 0.0;  // clamped into [-6, +3] m/s^2
};

constexpr double kAccelMin = -6.0;
constexpr double kAccelMax = 3.0;
constexpr double kComplianceSpread = 0.15;  // +-15% cruise-speed variation per AV

/// One crossing between this agent's route and another agent's route,
/// precomputed once per simulation from the full route polylines.
struct ConflictAhead {
    Vec2 point;
    double own_arc = 0.0;
    AgentId other = 0;
    double other_arc = 0.0;
};

struct OtherView {
    AgentId id = 0;
    bool is_av = false;
    AgentState state;
    double route_arc = 0.0;
    const Polyline* route = nullptr;  // published route (ground-truth perception)
};

struct PolicyView {
    AgentId self_id = 0;
    AgentState self;
    double arc = 0.0;
    const Route* route = nullptr;
    double speed_limit = 8.0;
    double time = 0.0;
    const std::vector<ConflictAhead>* conflicts = nullptr;  // sorted by own_arc
    std::vector<OtherView> others;                          // excludes self
};

using PolicyFn = std::function<PolicyCommand(const PolicyView&)>;

namespace policy {

constexpr double kSpeedGain = 1.5;
constexpr double kEngageDecel = 2.5;     // start braking once this decel is required
constexpr double kYieldWindow = 4.0;     // ETA overlap tolerance, seconds
constexpr double kStandoff = 3.0;        // stop this far before a conflict
constexpr double kHoldRadius = 12.0;     // keep yielding while others are this close
constexpr double kOccupyRadius = 2.5;    // a stopped agent this close blocks physically
constexpr double kStoppedSpeed = 0.5;
constexpr double kFollowGap = 6.0;
constexpr double kSameLaneLateral = 2.0;
constexpr double kAlignAngle = 30.0 * M_PI / 180.0;
constexpr double kEtaFloor = 0.3;
constexpr double kPassMargin = 2.0;      // vehicle half-length allowance
constexpr double kInteractRange = 200.0;

struct EtaInterval {
    double enter;
    double exit;
};

inline EtaInterval eta_interval(double dist, double v) {
    const double ve = std::fmax(v, kEtaFloor);
    return {std::fmax(dist - kPassMargin, 0.0) / ve, (dist + kPassMargin) / ve};
}

/// Mutual-yield controller. Cruises at the lane limit, car-follows along its
/// own corridor, and brakes to a standoff before any route crossing whose
/// ETA windows overlap another agent's. A stopped agent near a crossing
/// counts as occupying it, and a holder keeps yielding while anyone with an
/// overlapping route stays within kHoldRadius, which makes mutual hesitation
/// stable instead of oscillatory. With `tiebreak` set, ETA overlaps are
/// instead resolved in favor of the lower agent id.
inline PolicyCommand yield_policy(const PolicyView& view, bool tiebreak) {
    const double v = view.self.v;
    const bool self_stopped = v < kStoppedSpeed;

    // cruise and same-corridor car following (a leader ahead on my own lane
    // is gap-controlled, never treated as a crossing conflict)
    double cruise_v = view.speed_limit;
    std::vector<AgentId> same_lane;
    double stop_arc = view.route->total_length;  // destination stop
    for (const OtherView& other : view.others) {
        if (distance(other.state.p, view.self.p) > kInteractRange) continue;
        const auto proj = view.route->points.project(other.state.p);
        if (proj.lateral > kSameLaneLateral) continue;
        const double heading = view.route->points.heading_at(proj.arc);
        if (std::fabs(wrap_angle(other.state.theta - heading)) > kAlignAngle) continue;
        const double gap = proj.arc - view.arc;
        if (gap < 0.5 || gap > 40.0) continue;
        same_lane.push_back(other.id);
        if (other.state.v < kStoppedSpeed) {
            stop_arc = std::fmin(stop_arc, proj.arc - kFollowGap);
        } else {
            const double follow_v =
                gap <= kFollowGap ? 0.0 : std::fmax(0.0, other.state.v + 0.3 * (gap - kFollowGap));
            cruise_v = std::fmin(cruise_v, follow_v);
        }
    }

    std::vector<double> keepout_arcs;  // crossings that must stay clear
    for (const ConflictAhead& c : *view.conflicts) {
        const double d_own = c.own_arc - view.arc;
        if (d_own < -kPassMargin) continue;
        if (std::find(same_lane.begin(), same_lane.end(), c.other) != same_lane.end()) continue;
        const OtherView* other = nullptr;
        for (const OtherView& o : view.others)
            if (o.id == c.other) other = &o;
        if (!other) continue;
        if (distance(other->state.p, view.self.p) > kInteractRange) continue;
        const double d_other = c.other_arc - other->route_arc;
        if (d_other < -kPassMargin) continue;  // they already passed this crossing
        if (c.own_arc - kStandoff >= view.arc) keepout_arcs.push_back(c.own_arc);

        const bool other_stopped = other->state.v < kStoppedSpeed;
        const double other_to_conflict = distance(other->state.p, c.point);
        bool must_yield = false;
        if (other_stopped) {
            if (tiebreak) {
                // under priority rules a parked agent holds nobody unless it
                // physically sits on the crossing
                must_yield = other_to_conflict <= kOccupyRadius;
            } else if (self_stopped) {
                // holder: keep yielding only while someone with an
                // overlapping route is still near the crossing
                must_yield = other_to_conflict <= kHoldRadius;
            } else {
                // a stopped agent near the crossing occupies it now
                const EtaInterval mine = eta_interval(d_own, v);
                must_yield = other_to_conflict <= kHoldRadius && mine.enter <= kYieldWindow;
            }
        } else if (self_stopped && !tiebreak) {
            must_yield = other_to_conflict <= kHoldRadius;
        } else {
            const EtaInterval mine = eta_interval(d_own, v);
            const EtaInterval theirs = eta_interval(d_other, other->state.v);
            must_yield = mine.enter <= theirs.exit + kYieldWindow && theirs.enter <= mine.exit + kYieldWindow;
        }
        if (!must_yield) continue;
        // the id order breaks ETA ties between AVs; physical occupancy is
        // never overridden
        if (tiebreak && other->is_av && view.self_id < c.other &&
            !(other_stopped && other_to_conflict <= kOccupyRadius))
            continue;
        if (d_own <= kStandoff) continue;  // too close to stop, roll through
        stop_arc = std::fmin(stop_arc, c.own_arc - kStandoff);
    }

    // keep crossings clear: a planned stop inside a live crossing zone moves
    // back to that crossing's standoff (cascading toward the rear)
    std::sort(keepout_arcs.rbegin(), keepout_arcs.rend());
    for (double k : keepout_arcs) {
        if (k - kStandoff < view.arc) continue;  // already committed past it
        if (stop_arc > k - kStandoff + 1e-6 && stop_arc < k + kOccupyRadius) stop_arc = k - kStandoff;
    }

    double a_cmd = kSpeedGain * (cruise_v - v);
    const double d_stop = stop_arc - view.arc;
    if (d_stop <= 0.3) {
        a_cmd = kAccelMin;
    } else {
        // required decel engages once material; approaches stay at cruise
        // speed until braking is kinematically due
        const double a_req = -(v * v) / (2.0 * d_stop);
        if (a_req <= -kEngageDecel) a_cmd = std::fmin(a_cmd, a_req);
    }

    if (v < kStoppedSpeed && a_cmd < 0.0) a_cmd = kAccelMin;  // crisp stop, no crawling tail
    return {std::clamp(a_cmd, kAccelMin, kAccelMax)};
}

}  // namespace policy

inline PolicyCommand conservative_yield(const PolicyView& view) { return policy::yield_policy(view, false); }
inline PolicyCommand priority_tiebreak(const PolicyView& view) { return policy::yield_policy(view, true); }

inline const std::map<std::string, PolicyFn>& policy_registry() {
    static const std::map<std::string, PolicyFn> registry{
        {"conservative_yield", conservative_yield},
        {"priority_tiebreak", priority_tiebreak},
    };
    return registry;
}

inline PolicyFn lookup_policy(const std::string& name) {
    auto it = policy_registry().find(name);
    if (it == policy_registry().end()) throw ConfigError("unknown policy '" + name + "'");
    return it->second;
}

/// Per-AV cruise-speed compliance factor, a pure function of the scenario
/// seed and agent id. Drivers track the limit imperfectly; the factor makes
/// execution vary between scenarios (children carry fresh seeds) while any
/// single scenario stays bit-replayable from its file alone.
inline double speed_compliance_factor(std::uint64_t scenario_seed, AgentId agent) {
    SplitMix64 rng(scenario_seed ^ (UINT64_C(0x9E3779B97F4A7C15) * (agent + 1)));
    rng.next_u64();
    return 1.0 - kComplianceSpread + 2.0 * kComplianceSpread * rng.next_double();
}

/// First pair (lowest ids) closer than `collision_distance`, center to center.
inline std::optional<std::pair<AgentId, AgentId>> detect_collision(const Scene& scene,
                                                                   double collision_distance = 2.0) {
    for (auto i = scene.begin(); i != scene.end(); ++i) {
        auto j = i;
        for (++j; j != scene.end(); ++j) {
            if (distance(i->second.p, j->second.p) < collision_distance) return {{i->first, j->first}};
        }
    }
    return std::nullopt;
}

/// All crossings between two route polylines with arc positions on both.
inline std::vector<std::tuple<Vec2, double, double>> route_crossings(const Polyline& a, const Polyline& b) {
    std::vector<std::tuple<Vec2, double, double>> out;
    if (a.size() < 2 || b.size() < 2) return out;
    SegmentGrid grid(6.0);
    const auto& pb = b.points();
    for (std::size_t j = 0; j + 1 < pb.size(); ++j) grid.insert(j, pb[j], pb[j + 1]);
    const auto& pa = a.points();
    for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
        grid.query(pa[i], pa[i + 1], [&](std::size_t j) {
            const auto hit = segment_intersection({pa[i], pa[i + 1]}, {pb[j], pb[j + 1]});
            if (!hit) return;
            const double arc_a = a.arc_at(i) + distance(pa[i], *hit);
            const double arc_b = b.arc_at(j) + distance(pb[j], *hit);
            out.push_back({*hit, arc_a, arc_b});
        });
    }
    // grid cells can repeat a segment pair; dedupe by arc
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return std::get<1>(x) < std::get<1>(y); });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const auto& x, const auto& y) {
                              return std::fabs(std::get<1>(x) - std::get<1>(y)) < 1e-9 &&
                                     std::fabs(std::get<2>(x) - std::get<2>(y)) < 1e-9;
                          }),
              out.end());
    return out;
}

namespace detail {

struct AgentRuntime {
    AgentId id = 0;
    bool is_av = false;
    double trigger = 0.0;
    double compliance = 1.0;
    Polyline path;                 // route points (AV) or waypoint polyline (NPC)
    Route route;                   // AV only
    std::vector<std::pair<double, double>> limits;  // (arc_end, speed_limit), AV
    std::vector<std::pair<double, double>> npc_targets;  // (arc_end, target speed)
    std::vector<ConflictAhead> conflicts;  // AV only
    double arc = 0.0;
    AgentState state;
};

inline double limit_at(const std::vector<std::pair<double, double>>& spans, double arc, double fallback) {
    for (const auto& [end, value] : spans) {
        if (arc <= end + 1e-9) return value;
    }
    return spans.empty() ? fallback : spans.back().second;
}

constexpr double kNpcGain = 2.0;
constexpr double kNpcCreepSpeed = 0.5;

}  // namespace detail


/// Deterministic fixed-step simulation of a scenario.
///
/// AVs stay frozen until their trigger time, then follow their planned route
/// under the named policy's longitudinal commands; lateral motion is pure
/// path following. NPCs track their waypoint polyline open loop with a
/// proportional speed controller. Terminates at the horizon, on the first
/// collision, or when every agent has been stationary for the configured
/// timeout (with all AVs triggered). Bit-deterministic given its inputs.
inline Observation simulate(const Scenario& scenario, const LaneGraph& graph,
                            const std::string& policy_name, const SimConfig& cfg = {}) {
    if (!(cfg.dt > 0.0 && cfg.dt <= 0.5)) throw ConfigError("sim dt must be in (0, 0.5]");
    if (cfg.horizon < 10.0) throw ConfigError("sim horizon must be >= 10 s");
    {
        const auto violations = validate(scenario, graph);
        if (!violations.empty()) {
            std::string msg = "invalid scenario:";
            for (const auto& v : violations) msg += " [" + violation_kind_name(v.kind) + "] " + v.message + ";";
            throw InvalidScenarioError(msg);
        }
    }
    const PolicyFn policy = lookup_policy(policy_name);

    std::vector<detail::AgentRuntime> agents;
    for (const AVSpec& av : scenario.avs) {
        detail::AgentRuntime a;
        a.id = av.id;
        a.is_av = true;
        a.trigger = av.t_trigger;
        a.compliance = speed_compliance_factor(scenario.rng_seed, av.id);
        a.route = plan_route(graph, av.p_start, av.p_dest);
        a.path = a.route.points;
        for (std::size_t i = 0; i < a.route.lane_sequence.size(); ++i) {
            const Lane* lane = graph.lane_by_id(a.route.lane_sequence[i]);
            a.limits.push_back({a.route.lane_end_arcs[i], lane ? lane->speed_limit : 8.0});
        }
        a.state.p = a.path.point_at(0.0);
        a.state.theta = a.path.heading_at(0.0);
        agents.push_back(std::move(a));
    }
    for (const NpcSpec& npc : scenario.npcs) {
        detail::AgentRuntime a;
        a.id = npc.id;
        a.is_av = false;
        std::vector<Vec2> pts;
        for (const Waypoint& w : npc.waypoints) {
            if (pts.empty() || distance(pts.back(), w.p) > 1e-9) pts.push_back(w.p);
        }
        a.path = Polyline{std::move(pts)};
        double acc = 0.0;
        std::size_t pi = 0;
        for (std::size_t i = 1; i < npc.waypoints.size(); ++i) {
            const double seg = distance(npc.waypoints[i - 1].p, npc.waypoints[i].p);
            if (seg <= 1e-9) continue;
            acc += seg;
            a.npc_targets.push_back({acc, npc.waypoints[i].v});
            ++pi;
        }
        (void)pi;
        a.state.p = a.path.point_at(0.0);
        a.state.theta = npc.waypoints.front().theta;
        a.state.v = npc.waypoints.front().v;
        agents.push_back(std::move(a));
    }
    std::sort(agents.begin(), agents.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });

    // pairwise route crossings, computed once per AV against every other agent
    for (auto& a : agents) {
        if (!a.is_av) continue;
        for (const auto& b : agents) {
            if (b.id == a.id) continue;
            for (const auto& [pt, arc_a, arc_b] : route_crossings(a.path, b.path))
                a.conflicts.push_back({pt, arc_a, b.id, arc_b});
        }
        std::sort(a.conflicts.begin(), a.conflicts.end(),
                  [](const ConflictAhead& x, const ConflictAhead& y) {
                      return x.own_arc != y.own_arc ? x.own_arc < y.own_arc : x.other < y.other;
                  });
    }

    Observation obs;
    obs.map_id = scenario.map_id;
    obs.dt = cfg.dt;
    for (const AVSpec& av : scenario.avs) obs.av_ids.push_back(av.id);
    std::sort(obs.av_ids.begin(), obs.av_ids.end());

    const auto record_scene = [&]() {
        Scene scene;
        for (const auto& a : agents) scene[a.id] = a.state;
        obs.scenes.push_back(std::move(scene));
    };
    record_scene();

    const auto steps = static_cast<long long>(std::llround(cfg.horizon / cfg.dt));
    double still_time = 0.0;
    for (long long k = 1; k <= steps; ++k) {
        const double t_prev = cfg.dt * static_cast<double>(k - 1);

        // snapshot of step-start states so updates are order-independent
        std::vector<AgentState> before(agents.size());
        std::vector<double> arcs(agents.size());
        for (std::size_t i = 0; i < agents.size(); ++i) {
            before[i] = agents[i].state;
            arcs[i] = agents[i].arc;
        }

        for (std::size_t i = 0; i < agents.size(); ++i) {
            auto& a = agents[i];
            double accel = 0.0;
            if (a.is_av && t_prev + 1e-9 < a.trigger) {
                accel = 0.0;  // frozen until trigger
            } else if (a.is_av) {
                PolicyView view;
                view.self_id = a.id;
                view.self = before[i];
                view.arc = arcs[i];
                view.route = &a.route;
                view.speed_limit = a.compliance * detail::limit_at(a.limits, arcs[i], 8.0);
                view.time = t_prev;
                view.conflicts = &a.conflicts;
                for (std::size_t jx = 0; jx < agents.size(); ++jx) {
                    if (jx == i) continue;
                    view.others.push_back(
                        {agents[jx].id, agents[jx].is_av, before[jx], arcs[jx], &agents[jx].path});
                }
                accel = std::clamp(policy(view).target_accel, kAccelMin, kAccelMax);
            } else {
                // waypoint followers keep creeping through zero-speed
                // waypoints; only the end of the path means stop
                double target = detail::limit_at(a.npc_targets, arcs[i], 0.0);
                if (arcs[i] >= a.path.length() - 1e-9)
                    target = 0.0;
                else
                    target = std::fmax(target, detail::kNpcCreepSpeed);
                accel = std::clamp(detail::kNpcGain * (target - before[i].v), kAccelMin, kAccelMax);
            }

            double v_new = std::fmax(0.0, before[i].v + accel * cfg.dt);
            if (!a.is_av && v_new < 1e-3 && arcs[i] >= a.path.length() - 1e-9) v_new = 0.0;
            double arc_new = arcs[i] + v_new * cfg.dt;
            if (arc_new >= a.path.length()) {
                arc_new = a.path.length();
                v_new = 0.0;
            }
            a.arc = arc_new;
            AgentState st;
            st.v = v_new;
            st.a = (v_new - before[i].v) / cfg.dt;
            if (arc_new != arcs[i]) {
                st.p = a.path.point_at(arc_new);
                st.theta = a.path.heading_at(arc_new);
            } else {
                st.p = before[i].p;
                st.theta = before[i].theta;
            }
            a.state = st;
        }

        record_scene();
        if (auto pair = detect_collision(obs.scenes.back(), cfg.collision_distance)) {
            obs.collision_flag = true;
            obs.collided_pair = pair;
            break;
        }

        bool all_still = true;
        const double t_now = cfg.dt * static_cast<double>(k);
        for (const auto& a : agents) {
            if (a.state.v > 1e-9) all_still = false;
            if (a.is_av && t_now < a.trigger) all_still = false;  // someone has not started yet
        }
        still_time = all_still ? still_time + cfg.dt : 0.0;
        if (still_time >= cfg.stationary_timeout - 1e-9) break;
    }
    return obs;
}

}  // namespace dlfuzz
