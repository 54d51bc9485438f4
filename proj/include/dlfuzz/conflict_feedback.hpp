#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/geometry.hpp"
#include "dlfuzz/road_network.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

struct ArrivalInfo {
    double t = 0.0;  // timestamp of closest approach to the region point
    double v = 0.0;  // speed at that sample
};

struct ConflictRegion {
    Vec2 point;
    std::vector<AgentId> involved;              // >= 2, ascending
    std::map<AgentId, ArrivalInfo> arrivals;
    std::vector<std::pair<AgentId, std::size_t>> source_segments;
};

struct ConflictAnalysis {
    std::vector<ConflictRegion> regions;  // merged, canonical order
    std::size_t raw_count = 0;            // pre-merge intersection count |C_S|
};

struct FeedbackScore {
    double spatial = 1.0;
    double temporal = 1.0;
    double combined = 1.0;
    std::vector<ConflictRegion> regions;
    std::size_t raw_count = 0;
};

constexpr double kRegionMergeRadius = 4.0;

namespace detail_feedback {

struct TrajSegments {
    AgentId id = 0;
    std::vector<TrajectoryPoint> pts;  // collapsed trajectory
    std::vector<LaneId> lane_ids;      // per segment, nearest lane to midpoint
};

inline TrajSegments collect(const Observation& obs, const LaneGraph& graph, AgentId id) {
    TrajSegments out;
    out.id = id;
    out.pts = av_trajectory(obs, id);
    for (std::size_t i = 0; i + 1 < out.pts.size(); ++i) {
        const Vec2 mid = 0.5 * (out.pts[i].p + out.pts[i + 1].p);
        out.lane_ids.push_back(graph.nearest_lane(mid).lane);
    }
    return out;
}

inline ArrivalInfo arrival_near(const std::vector<TrajectoryPoint>& pts, Vec2 point) {
    ArrivalInfo best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const TrajectoryPoint& tp : pts) {
        const double d = distance(tp.p, point);
        if (d < best_d - 1e-12) {
            best_d = d;
            best = {tp.t, tp.v};
        }
    }
    return best;
}

}  // namespace detail_feedback

/// Pairwise trajectory-segment intersections between AVs, excluding segment
/// pairs attributed to the same lane (following and coasting along one lane
/// is not spatial competition). Raw intersections of one AV pair closer than
/// kRegionMergeRadius merge into a single region anchored at the earliest
/// intersection in canonical segment order; |C_S| counts before merging.
inline ConflictAnalysis conflict_points(const Observation& obs, const LaneGraph& graph) {
    ConflictAnalysis out;
    std::vector<detail_feedback::TrajSegments> trajs;
    for (AgentId id : obs.av_ids) trajs.push_back(detail_feedback::collect(obs, graph, id));

    for (std::size_t a = 0; a < trajs.size(); ++a) {
        for (std::size_t b = a + 1; b < trajs.size(); ++b) {
            const auto& ta = trajs[a];
            const auto& tb = trajs[b];
            if (ta.pts.size() < 2 || tb.pts.size() < 2) continue;

            SegmentGrid grid(4.0);
            for (std::size_t j = 0; j + 1 < tb.pts.size(); ++j) grid.insert(j, tb.pts[j].p, tb.pts[j + 1].p);

            struct Hit {
                Vec2 point;
                std::size_t seg_a, seg_b;
            };
            std::vector<Hit> hits;
            for (std::size_t i = 0; i + 1 < ta.pts.size(); ++i) {
                std::vector<std::size_t> cand;
                grid.query(ta.pts[i].p, ta.pts[i + 1].p, [&](std::size_t j) { cand.push_back(j); });
                std::sort(cand.begin(), cand.end());
                cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
                for (std::size_t j : cand) {
                    if (ta.lane_ids[i] == tb.lane_ids[j]) continue;
                    const auto hit = segment_intersection({ta.pts[i].p, ta.pts[i + 1].p},
                                                          {tb.pts[j].p, tb.pts[j + 1].p});
                    if (hit) hits.push_back({*hit, i, j});
                }
            }
            out.raw_count += hits.size();

            std::sort(hits.begin(), hits.end(), [](const Hit& x, const Hit& y) {
                return x.seg_a != y.seg_a ? x.seg_a < y.seg_a : x.seg_b < y.seg_b;
            });
            std::vector<ConflictRegion> regions;
            for (const Hit& h : hits) {
                ConflictRegion* target = nullptr;
                for (ConflictRegion& r : regions) {
                    if (distance(r.point, h.point) < kRegionMergeRadius) {
                        target = &r;
                        break;
                    }
                }
                if (!target) {
                    ConflictRegion r;
                    r.point = h.point;
                    r.involved = {std::min(ta.id, tb.id), std::max(ta.id, tb.id)};
                    regions.push_back(std::move(r));
                    target = &regions.back();
                }
                target->source_segments.push_back({ta.id, h.seg_a});
                target->source_segments.push_back({tb.id, h.seg_b});
            }
            for (ConflictRegion& r : regions) {
                r.arrivals[ta.id] = detail_feedback::arrival_near(ta.pts, r.point);
                r.arrivals[tb.id] = detail_feedback::arrival_near(tb.pts, r.point);
                out.regions.push_back(std::move(r));
            }
        }
    }
    return out;
}

/// Spatial-conflict score: 1 - |C_S| / sum_i (N_i - 1), clamped to [0, 1].
/// AVs whose collapsed trajectory has fewer than 2 points drop out of the
/// denominator.
inline double spatial_score(const Observation& obs, std::size_t raw_count) {
    std::size_t denom = 0;
    for (AgentId id : obs.av_ids) {
        const auto pts = av_trajectory(obs, id);
        if (pts.size() >= 2) denom += pts.size() - 1;
    }
    if (denom == 0) throw DegenerateTrajectoriesError("no AV produced a trajectory segment");
    const double score = 1.0 - static_cast<double>(raw_count) / static_cast<double>(denom);
    return std::clamp(score, 0.0, 1.0);
}

/// Region score: min over involved pairs of |arrival gap| + both speeds.
/// Lower means tighter, slower convergence on the region.
inline double region_temporal_score(const ConflictRegion& region) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < region.involved.size(); ++i) {
        for (std::size_t j = i + 1; j < region.involved.size(); ++j) {
            const ArrivalInfo& a = region.arrivals.at(region.involved[i]);
            const ArrivalInfo& b = region.arrivals.at(region.involved[j]);
            best = std::fmin(best, std::fabs(a.t - b.t) + a.v + b.v);
        }
    }
    return best;
}

/// Scenario-level temporal score: clip(min_R phi_R / n_ti, 0, 1); with no
/// regions there is no temporal competition at all, which scores worst (1).
inline double temporal_score(const std::vector<ConflictRegion>& regions, double n_ti = 30.0) {
    if (regions.empty()) return 1.0;
    double m = std::numeric_limits<double>::infinity();
    for (const ConflictRegion& r : regions) m = std::fmin(m, region_temporal_score(r));
    return std::clamp(m / n_ti, 0.0, 1.0);
}

/// Combined feedback phi = alpha * spatial + (1 - alpha) * temporal.
inline FeedbackScore feedback(const Observation& obs, const LaneGraph& graph, double alpha = 0.5,
                              double n_ti = 30.0) {
    ConflictAnalysis analysis = conflict_points(obs, graph);
    FeedbackScore out;
    out.raw_count = analysis.raw_count;
    out.spatial = spatial_score(obs, analysis.raw_count);
    out.temporal = temporal_score(analysis.regions, n_ti);
    out.combined = alpha * out.spatial + (1.0 - alpha) * out.temporal;
    out.regions = std::move(analysis.regions);
    return out;
}

}  // namespace dlfuzz
