#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dlfuzz/conflict_feedback.hpp"
#include "dlfuzz/errors.hpp"
#include "dlfuzz/rng.hpp"
#include "dlfuzz/road_network.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

enum class MutationMode { Full, SpatialOnly, TemporalOnly };

struct GenConfig {
    std::size_t max_avs = 6;           // N_A
    std::size_t local_search_budget = 20;  // N_local
    double trigger_min = 0.0;
    double trigger_max = 30.0;
    double waypoint_pos_jitter = 2.0;  // meters
    double waypoint_speed_jitter = 2.0;  // m/s
    MutationMode mode = MutationMode::Full;
};

struct GenResult {
    Scenario scenario;
    std::string operator_used;  // "temporal" | "spatial" | "reseed"
};

/// Synchronize arrival times at one conflict region by shifting trigger
/// times of its involved AVs toward each other. Returns nothing when the
/// parent run exposed no conflict regions. Pairing walks a uniform shuffle
/// of the involved set; an AV named in two consecutive pairs takes the
/// later update.
inline std::optional<std::vector<AVSpec>> temporal_mutation(const std::vector<AVSpec>& avs,
                                                            const std::vector<ConflictRegion>& regions,
                                                            SplitMix64& rng,
                                                            const GenConfig& cfg = {}) {
    if (regions.empty()) return std::nullopt;
    std::vector<AVSpec> out = avs;
    const ConflictRegion& region = regions[rng.uniform_index(regions.size())];
    std::vector<AgentId> order = region.involved;
    rng.shuffle(order);

    const auto find_av = [&](AgentId id) -> AVSpec* {
        for (AVSpec& av : out)
            if (av.id == id) return &av;
        return nullptr;
    };
    const auto clamp_trigger = [&](double t) {
        return std::clamp(t, cfg.trigger_min, cfg.trigger_max);
    };

    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        AVSpec* i = find_av(order[k]);
        AVSpec* j = find_av(order[k + 1]);
        if (!i || !j) continue;
        const auto ai = region.arrivals.find(i->id);
        const auto aj = region.arrivals.find(j->id);
        if (ai == region.arrivals.end() || aj == region.arrivals.end()) continue;
        const double delta = ai->second.t - aj->second.t;
        i->t_trigger = clamp_trigger(std::fmax(0.0, i->t_trigger - delta / 2.0));
        j->t_trigger = clamp_trigger(std::fmax(0.0, j->t_trigger + delta / 2.0));
    }
    return out;
}

/// Spatial score of planned (not simulated) trajectories: plan every AV's
/// route, then apply the spatial-conflict formula to the route polylines.
/// Segment lane ids come straight from the route's lane spans.
inline double estimate_spatial_score_offline(const LaneGraph& graph, const std::vector<AVSpec>& avs) {
    struct Planned {
        Polyline pts;
        std::vector<LaneId> seg_lanes;
    };
    std::vector<Planned> planned;
    std::size_t denom = 0;
    for (const AVSpec& av : avs) {
        const Route route = plan_route(graph, av.p_start, av.p_dest);  // NoRoute propagates
        Planned p;
        p.pts = route.points;
        for (std::size_t i = 0; i + 1 < p.pts.points().size(); ++i) {
            const double mid_arc = 0.5 * (p.pts.arc_at(i) + p.pts.arc_at(i + 1));
            LaneId lane = route.lane_sequence.back();
            for (std::size_t s = 0; s < route.lane_sequence.size(); ++s) {
                if (mid_arc <= route.lane_end_arcs[s] + 1e-9) {
                    lane = route.lane_sequence[s];
                    break;
                }
            }
            p.seg_lanes.push_back(lane);
        }
        if (p.pts.size() >= 2) denom += p.pts.size() - 1;
        planned.push_back(std::move(p));
    }
    if (denom == 0) return 1.0;

    std::size_t crossings = 0;
    for (std::size_t a = 0; a < planned.size(); ++a) {
        for (std::size_t b = a + 1; b < planned.size(); ++b) {
            const auto& pa = planned[a].pts.points();
            const auto& pb = planned[b].pts.points();
            if (pa.size() < 2 || pb.size() < 2) continue;
            SegmentGrid grid(4.0);
            for (std::size_t j = 0; j + 1 < pb.size(); ++j) grid.insert(j, pb[j], pb[j + 1]);
            for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
                std::vector<std::size_t> cand;
                grid.query(pa[i], pa[i + 1], [&](std::size_t j) { cand.push_back(j); });
                std::sort(cand.begin(), cand.end());
                cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
                for (std::size_t j : cand) {
                    if (planned[a].seg_lanes[i] == planned[b].seg_lanes[j]) continue;
                    if (segment_intersection({pa[i], pa[i + 1]}, {pb[j], pb[j + 1]})) ++crossings;
                }
            }
        }
    }
    return std::clamp(1.0 - static_cast<double>(crossings) / static_cast<double>(denom), 0.0, 1.0);
}

namespace detail_gen {

// Fresh AV id: one past the existing AVs, skipping anything an NPC holds so
// the AV id space stays low (and priority order sane) regardless of the
// NPC numbering convention.
inline AgentId next_agent_id(const std::vector<AVSpec>& avs, const std::vector<NpcSpec>& npcs) {
    AgentId next = 1;
    for (const AVSpec& av : avs) next = std::max(next, av.id + 1);
    const auto taken = [&](AgentId id) {
        for (const NpcSpec& npc : npcs)
            if (npc.id == id) return true;
        return false;
    };
    while (taken(next)) ++next;
    return next;
}

inline std::vector<Vec2> occupied_spawns(const std::vector<AVSpec>& avs, const std::vector<NpcSpec>& npcs) {
    std::vector<Vec2> out;
    for (const AVSpec& av : avs) out.push_back(av.p_start);
    for (const NpcSpec& npc : npcs)
        if (!npc.waypoints.empty()) out.push_back(npc.waypoints.front().p);
    return out;
}

/// One uniform candidate: spawn point, reachable terminal destination,
/// trigger in bounds. Empty when the draw is infeasible.
inline std::optional<AVSpec> draw_candidate(const LaneGraph& graph, const std::vector<Vec2>& occupied,
                                            AgentId id, SplitMix64& rng, const GenConfig& cfg) {
    if (graph.spawn_points.empty()) return std::nullopt;
    const SpawnPoint& sp = graph.spawn_points[rng.uniform_index(graph.spawn_points.size())];
    for (const Vec2& p : occupied) {
        if (distance(p, sp.position) < kMinSpawnSeparation) return std::nullopt;
    }
    const auto hit = graph.nearest_lane(sp.position);
    const auto terminals = graph.reachable_terminals(hit.lane);
    if (terminals.empty()) return std::nullopt;
    const Lane* dest_lane = graph.lane_by_id(terminals[rng.uniform_index(terminals.size())]);
    const Vec2 dest = dest_lane->centerline.points().back();
    if (distance(dest, sp.position) < 1e-6) return std::nullopt;
    AVSpec av;
    av.id = id;
    av.p_start = sp.position;
    av.p_dest = dest;
    av.t_trigger = rng.uniform(cfg.trigger_min, cfg.trigger_max);
    return av;
}

}  // namespace detail_gen

namespace detail_gen {

/// Rough offline travel-time estimate along a planned route: per-lane limit
/// traversal plus a constant pull-away allowance. Deliberately ignores
/// interactions, so alignment built on it carries seconds of error.
inline double planned_travel_time(const LaneGraph& graph, const Route& route, double upto_arc) {
    double t = 1.2;  // pull-away allowance
    double prev = 0.0;
    for (std::size_t i = 0; i < route.lane_sequence.size(); ++i) {
        const double end = std::fmin(route.lane_end_arcs[i], upto_arc);
        if (end > prev) {
            const Lane* lane = graph.lane_by_id(route.lane_sequence[i]);
            t += (end - prev) / std::fmax(lane ? lane->speed_limit : 8.0, 1.0);
            prev = end;
        }
        if (route.lane_end_arcs[i] >= upto_arc) break;
    }
    return t;
}

constexpr double kTriggerAlignProbability = 0.75;

/// Trigger for a freshly added AV: with probability kTriggerAlignProbability,
/// aimed so its planned arrival at the first route crossing with a uniformly
/// chosen crossing partner matches that partner's planned arrival; otherwise
/// (or when no existing route crosses the candidate's) a uniform draw.
/// Planned times ignore interactions, so aimed triggers still miss by
/// seconds; the temporal operator exists to close that gap.
inline double aligned_trigger(const LaneGraph& graph, const std::vector<AVSpec>& avs,
                              const AVSpec& candidate, SplitMix64& rng, const GenConfig& cfg) {
    const double uniform_fallback = rng.uniform(cfg.trigger_min, cfg.trigger_max);
    const bool align = rng.next_double() < kTriggerAlignProbability;
    if (avs.empty() || !align) return uniform_fallback;
    Route cand_route;
    try {
        cand_route = plan_route(graph, candidate.p_start, candidate.p_dest);
    } catch (const NoRouteError&) {
        return uniform_fallback;
    }
    const auto& cp = cand_route.points.points();
    SegmentGrid grid(6.0);
    for (std::size_t i = 0; i + 1 < cp.size(); ++i) grid.insert(i, cp[i], cp[i + 1]);

    struct Partner {
        const AVSpec* av;
        Route route;
        double cand_arc;
        double own_arc;
    };
    std::vector<Partner> partners;
    for (const AVSpec& av : avs) {
        Route route;
        try {
            route = plan_route(graph, av.p_start, av.p_dest);
        } catch (const NoRouteError&) {
            continue;
        }
        const auto& tp = route.points.points();
        double cand_arc = -1.0, own_arc = -1.0;
        for (std::size_t j = 0; j + 1 < tp.size() && cand_arc < 0.0; ++j) {
            grid.query(tp[j], tp[j + 1], [&](std::size_t i) {
                if (cand_arc >= 0.0) return;
                const auto hit = segment_intersection({tp[j], tp[j + 1]}, {cp[i], cp[i + 1]});
                if (!hit) return;
                cand_arc = cand_route.points.arc_at(i) + distance(cp[i], *hit);
                own_arc = route.points.arc_at(j) + distance(tp[j], *hit);
            });
        }
        if (cand_arc >= 0.0) partners.push_back({&av, std::move(route), cand_arc, own_arc});
    }
    if (partners.empty()) return uniform_fallback;
    const Partner& pick = partners[rng.uniform_index(partners.size())];
    const double target_eta = pick.av->t_trigger + planned_travel_time(graph, pick.route, pick.own_arc);
    const double cand_travel = planned_travel_time(graph, cand_route, pick.cand_arc);
    return std::clamp(target_eta - cand_travel, cfg.trigger_min, cfg.trigger_max);
}

}  // namespace detail_gen

struct CandidateSearch {
    AVSpec best;
    double best_score = 1.0;
    std::vector<double> scores;  // every evaluated candidate, draw order
};

/// Offline local search: best (lowest estimated spatial score) of
/// N_local + 1 uniform candidate draws against the current AV set.
inline CandidateSearch local_search_candidate(const LaneGraph& graph, const std::vector<AVSpec>& avs,
                                              const std::vector<Vec2>& occupied, AgentId id,
                                              SplitMix64& rng, const GenConfig& cfg) {
    CandidateSearch result;
    bool have = false;
    const std::size_t wanted = cfg.local_search_budget + 1;
    const std::size_t max_attempts = 5 * (cfg.local_search_budget + 1);
    std::size_t attempts = 0;
    while (result.scores.size() < wanted && attempts < max_attempts) {
        ++attempts;
        auto cand = detail_gen::draw_candidate(graph, occupied, id, rng, cfg);
        if (!cand) continue;
        std::vector<AVSpec> with = avs;
        with.push_back(*cand);
        double score;
        try {
            score = estimate_spatial_score_offline(graph, with);
        } catch (const NoRouteError&) {
            continue;
        }
        result.scores.push_back(score);
        if (!have || score < result.best_score) {
            result.best = *cand;
            result.best_score = score;
            have = true;
        }
    }
    if (!have) throw NoFeasibleCandidateError("no routable AV candidate found");
    return result;
}

/// Perturb NPC waypoints: uniform positional jitter projected back onto the
/// waypoint's lane plus a speed nudge, reverting any waypoint that lands
/// within 10 m of a conflict region so NPC variation stays out of the
/// AV interaction zone.
inline std::vector<NpcSpec> waypoint_mutator(const std::vector<NpcSpec>& npcs,
                                             const std::vector<ConflictRegion>& regions,
                                             const LaneGraph& graph, SplitMix64& rng,
                                             const GenConfig& cfg = {}) {
    constexpr double kConflictClearance = 10.0;
    std::vector<NpcSpec> out = npcs;
    for (NpcSpec& npc : out) {
        for (Waypoint& w : npc.waypoints) {
            const Waypoint original = w;
            const double radius = cfg.waypoint_pos_jitter * std::sqrt(rng.next_double());
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            const double dv = rng.uniform(-cfg.waypoint_speed_jitter, cfg.waypoint_speed_jitter);
            const Vec2 jittered = w.p + radius * Vec2{std::cos(angle), std::sin(angle)};

            const auto hit = graph.nearest_lane(original.p);
            const Lane* lane = graph.lane_by_id(hit.lane);
            if (!lane) continue;
            const auto proj = lane->centerline.project(jittered);
            Waypoint moved;
            moved.p = proj.point;
            moved.theta = lane->centerline.heading_at(proj.arc);
            moved.v = std::clamp(original.v + dv, 0.0, std::fmin(lane->speed_limit, kMaxWaypointSpeed));

            bool near_region = false;
            for (const ConflictRegion& r : regions) {
                if (distance(moved.p, r.point) < kConflictClearance) {
                    near_region = true;
                    break;
                }
            }
            w = near_region ? original : moved;
        }
    }
    return out;
}

/// Spatial-aware mutation: trim oversized AV sets, then add the best
/// candidate found by offline local search, then jitter the NPCs.
inline std::pair<std::vector<AVSpec>, std::vector<NpcSpec>> spatial_mutation(
    const std::vector<AVSpec>& avs, const std::vector<NpcSpec>& npcs, const LaneGraph& graph,
    const std::vector<ConflictRegion>& regions, SplitMix64& rng, const GenConfig& cfg = {}) {
    std::vector<AVSpec> out = avs;
    if (out.size() >= cfg.max_avs) {
        const std::size_t hi = cfg.max_avs - 2;                      // removal size in [1, N_A - 2]
        std::size_t n = 1 + rng.uniform_index(std::max<std::size_t>(hi, 1));
        n = std::min(n, out.size() - 2);  // keep at least 2
        std::vector<std::size_t> idx(out.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        idx.resize(n);
        std::sort(idx.rbegin(), idx.rend());
        for (std::size_t i : idx) out.erase(out.begin() + static_cast<long>(i));
    }

    if (out.size() < cfg.max_avs) {
        const AgentId id = detail_gen::next_agent_id(out, npcs);
        auto search = local_search_candidate(graph, out, detail_gen::occupied_spawns(out, npcs), id, rng, cfg);
        // geometry comes from the local search; timing aims the new AV at a
        // randomly chosen existing arrival so the added crossing is live
        search.best.t_trigger = detail_gen::aligned_trigger(graph, out, search.best, rng, cfg);
        out.push_back(search.best);
    }

    return {std::move(out), waypoint_mutator(npcs, regions, graph, rng, cfg)};
}

/// Mutation dispatch: temporal adjustment first, spatial exploration when
/// there are no regions to synchronize or the parent's feedback is weak
/// (draw u < phi). Invalid mutants are re-drawn within the chosen operator;
/// after 10 misses the parent comes back with only a fresh seed.
inline GenResult generate(const Scenario& parent, double phi, const std::vector<ConflictRegion>& regions,
                          const LaneGraph& graph, SplitMix64& rng, const GenConfig& cfg = {}) {
    const auto finalize = [&](Scenario s, std::string op) {
        s.rng_seed = rng.next_u64();
        return GenResult{std::move(s), std::move(op)};
    };

    std::optional<std::vector<AVSpec>> temporal_first;
    if (cfg.mode != MutationMode::SpatialOnly)
        temporal_first = temporal_mutation(parent.avs, regions, rng, cfg);
    bool spatial_path;
    switch (cfg.mode) {
        case MutationMode::SpatialOnly: spatial_path = true; break;
        case MutationMode::TemporalOnly: spatial_path = false; break;
        default: {
            const double u = rng.next_double();
            spatial_path = !temporal_first || u < phi;
        }
    }

    for (int attempt = 0; attempt < 10; ++attempt) {
        Scenario child = parent;
        std::string op;
        if (spatial_path) {
            try {
                auto [avs, npcs] = spatial_mutation(parent.avs, parent.npcs, graph, regions, rng, cfg);
                child.avs = std::move(avs);
                child.npcs = std::move(npcs);
                op = "spatial";
            } catch (const NoFeasibleCandidateError&) {
                break;  // fall through to reseeded parent
            }
        } else {
            std::optional<std::vector<AVSpec>> mutated =
                attempt == 0 ? std::move(temporal_first) : temporal_mutation(parent.avs, regions, rng, cfg);
            if (!mutated) break;
            child.avs = std::move(*mutated);
            op = "temporal";
        }
        if (validate(child, graph, cfg.max_avs).empty()) return finalize(std::move(child), op);
    }
    return finalize(parent, "reseed");
}

}  // namespace dlfuzz
