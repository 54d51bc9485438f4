#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/motion_prediction.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

struct OracleConfig {
    double eps_v = 0.01;    // stationarity speed threshold, strict <
    double delta_t = 5.0;   // stationarity window and intent history window
    double d_eps = 2.5;     // spatial overlap radius for intent conflicts
    double tau_eps = 2.0;   // temporal overlap tolerance
    double horizon = 5.0;   // intent prediction horizon
    PredictionConfig prediction;
};

struct WaitForGraph {
    double t = 0.0;
    std::vector<AgentId> vertices;                     // ascending AV ids
    std::set<std::pair<AgentId, AgentId>> edges;       // directed (i -> j)

    bool has_edge(AgentId i, AgentId j) const { return edges.count({i, j}) > 0; }
};

enum class Outcome { Pass, Fail };

struct OracleVerdict {
    Outcome outcome = Outcome::Pass;
    std::optional<std::vector<AgentId>> cycle;  // ordered, starts at its smallest id
    std::optional<double> t_detect;
    std::vector<WaitForGraph> graphs;  // every nonempty graph built, audit trail
};

/// True iff the agent's speed stayed strictly below eps_v at every sample in
/// [t - delta_t, t].
inline bool phi_stop(const Observation& obs, AgentId av, double t, const OracleConfig& cfg = {}) {
    if (!obs.has_agent(av)) throw UnknownAgentError("agent " + std::to_string(av) + " unknown");
    const double dt = obs.dt;
    if (t < cfg.delta_t - 1e-9) throw WindowOutOfRangeError("t precedes one full detection window");
    const auto hi = static_cast<long long>(std::floor(t / dt + 1e-9));
    const auto lo = static_cast<long long>(std::ceil((t - cfg.delta_t) / dt - 1e-9));
    if (hi >= static_cast<long long>(obs.scenes.size()) || lo < 0)
        throw WindowOutOfRangeError("window extends past the observation");
    for (long long k = lo; k <= hi; ++k) {
        if (!(obs.state_at(static_cast<std::size_t>(k), av).v < cfg.eps_v)) return false;
    }
    return true;
}

/// Space-time overlap test: some sample pair lies within tau_eps seconds and
/// d_eps meters of each other.
inline bool trajectories_conflict(const PredictedTrajectory& a, const PredictedTrajectory& b,
                                  const OracleConfig& cfg = {}) {
    for (const TimedPoint& pa : a.samples) {
        for (const TimedPoint& pb : b.samples) {
            if (std::fabs(pa.t - pb.t) <= cfg.tau_eps && distance(pa.p, pb.p) <= cfg.d_eps) return true;
        }
    }
    return false;
}

namespace detail {

/// Same-direction corridor test. Predicted intents are straight rays, so two
/// agents queueing along one lane show up as near-collinear, aligned
/// trajectories; plain car-following must not count as a wait-for edge.
/// Lateral offsets are measured against the infinite line through each ray,
/// so rays of different extents along one lane still register as aligned.
inline bool same_corridor(const PredictedTrajectory& a, const PredictedTrajectory& b) {
    if (a.samples.size() < 2 || b.samples.size() < 2) return false;
    const Vec2 da = a.samples.back().p - a.samples.front().p;
    const Vec2 db = b.samples.back().p - b.samples.front().p;
    if (norm(da) < 1.0 || norm(db) < 1.0) return false;
    const double ha = std::atan2(da.y, da.x);
    const double hb = std::atan2(db.y, db.x);
    if (std::fabs(wrap_angle(ha - hb)) > 30.0 * M_PI / 180.0) return false;
    const auto line_offset = [](Vec2 p, Vec2 origin, Vec2 dir) {
        return std::fabs(cross(dir, p - origin)) / norm(dir);
    };
    const double lat = std::fmax(
        std::fmax(line_offset(a.samples.front().p, b.samples.front().p, db),
                  line_offset(a.samples.back().p, b.samples.front().p, db)),
        std::fmax(line_offset(b.samples.front().p, a.samples.front().p, da),
                  line_offset(b.samples.back().p, a.samples.front().p, da)));
    return lat < 2.0;
}

inline bool ever_moved_by(const Observation& obs, AgentId id, double t, double v_move) {
    const auto hi = std::min<long long>(static_cast<long long>(obs.scenes.size()) - 1,
                                        static_cast<long long>(std::floor(t / obs.dt + 1e-9)));
    for (long long k = 0; k <= hi; ++k) {
        if (obs.state_at(static_cast<std::size_t>(k), id).v > v_move) return true;
    }
    return false;
}

}  // namespace detail

/// Wait-for edge i -> j: i is stationary and i's pre-stop intent conflicts
/// with j's predicted motion (both anchored at their last moving instant).
/// Suppressed when the two intents share one corridor with aligned headings.
inline bool wait_for_edge(const Observation& obs, AgentId av_i, AgentId av_j, double t,
                          const OracleConfig& cfg = {}) {
    if (av_i == av_j) return false;
    if (!phi_stop(obs, av_i, t, cfg)) return false;
    const auto intent_i = pre_stop_intent(obs, av_i, t, cfg.delta_t, cfg.horizon, cfg.prediction);
    const auto intent_j = pre_stop_intent(obs, av_j, t, cfg.delta_t, cfg.horizon, cfg.prediction);
    if (detail::same_corridor(intent_i, intent_j)) return false;
    return trajectories_conflict(intent_i, intent_j, cfg);
}

/// Wait-for graph over all ordered AV pairs at time t. AVs that have never
/// moved cannot be waiting, so they contribute no outgoing edges (a parked
/// vehicle can still be waited on).
inline WaitForGraph build_wait_for_graph(const Observation& obs, double t, const OracleConfig& cfg = {}) {
    WaitForGraph g;
    g.t = t;
    g.vertices = obs.av_ids;

    std::map<AgentId, bool> stopped;
    std::map<AgentId, bool> moved;
    for (AgentId id : g.vertices) {
        stopped[id] = phi_stop(obs, id, t, cfg);
        moved[id] = detail::ever_moved_by(obs, id, t, cfg.prediction.v_move);
    }
    const bool any_source = std::any_of(g.vertices.begin(), g.vertices.end(),
                                        [&](AgentId id) { return stopped[id] && moved[id]; });
    if (!any_source) return g;

    std::map<AgentId, PredictedTrajectory> intents;
    for (AgentId id : g.vertices)
        intents[id] = pre_stop_intent(obs, id, t, cfg.delta_t, cfg.horizon, cfg.prediction);

    for (AgentId i : g.vertices) {
        if (!stopped[i] || !moved[i]) continue;
        for (AgentId j : g.vertices) {
            if (i == j) continue;
            if (detail::same_corridor(intents[i], intents[j])) continue;
            if (trajectories_conflict(intents[i], intents[j], cfg)) g.edges.insert({i, j});
        }
    }
    return g;
}

/// One directed cycle if any exists. Deterministic choice: among all
/// elementary cycles, the one whose sorted vertex list is lexicographically
/// smallest, then the smallest rotation sequence.
inline std::optional<std::vector<AgentId>> detect_cycle(const WaitForGraph& g) {
    std::vector<AgentId> verts = g.vertices;
    std::sort(verts.begin(), verts.end());

    std::optional<std::vector<AgentId>> best;
    std::vector<AgentId> best_sorted;

    std::vector<AgentId> path;
    std::set<AgentId> on_path;

    const auto consider = [&](const std::vector<AgentId>& cycle) {
        if (cycle.size() < 2) return;  // self-edges are not wait-for cycles
        std::vector<AgentId> sorted = cycle;
        std::sort(sorted.begin(), sorted.end());
        if (!best || sorted < best_sorted || (sorted == best_sorted && cycle < *best)) {
            best = cycle;
            best_sorted = std::move(sorted);
        }
    };

    // enumerate elementary cycles: DFS from each start, visiting only ids >=
    // start so each cycle is found once, rooted at its smallest vertex
    std::function<void(AgentId, AgentId)> dfs = [&](AgentId start, AgentId u) {
        for (const auto& [from, to] : g.edges) {
            if (from != u) continue;
            if (to == start) {
                consider(path);
            } else if (to > start && !on_path.count(to)) {
                path.push_back(to);
                on_path.insert(to);
                dfs(start, to);
                on_path.erase(to);
                path.pop_back();
            }
        }
    };

    for (AgentId start : verts) {
        path = {start};
        on_path = {start};
        dfs(start, start);
    }
    return best;
}

/// Scan the observation for the earliest wait-for cycle.
///
/// Timestamps are scanned at 1 s stride starting at delta_t; the stop window
/// changes slowly, so a finer stride buys nothing. Collided observations are
/// rejected: a run that violates safety constraints is not a deadlock.
inline OracleVerdict evaluate(const Observation& obs, const OracleConfig& cfg = {}) {
    if (obs.collision_flag) throw CollidedObservationError("collided runs are never deadlocks");
    OracleVerdict verdict;
    const double t_end = obs.end_time();
    for (double t = cfg.delta_t; t <= t_end + 1e-9; t += 1.0) {
        WaitForGraph g = build_wait_for_graph(obs, std::fmin(t, t_end), cfg);
        if (g.edges.empty()) continue;
        verdict.graphs.push_back(g);
        if (auto cycle = detect_cycle(g)) {
            verdict.outcome = Outcome::Fail;
            verdict.cycle = std::move(cycle);
            verdict.t_detect = g.t;
            return verdict;
        }
    }
    return verdict;
}

}  // namespace dlfuzz
