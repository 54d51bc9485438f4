#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlfuzz/conflict_feedback.hpp"
#include "dlfuzz/deadlock_oracle.hpp"
#include "dlfuzz/errors.hpp"
#include "dlfuzz/rng.hpp"
#include "dlfuzz/scenario_generation.hpp"
#include "dlfuzz/simulator.hpp"

namespace dlfuzz {

enum class CampaignMode { Guided, RandomBaseline };
enum class OracleMode { WaitFor, NaiveTimer };

inline std::string campaign_mode_name(CampaignMode m) {
    return m == CampaignMode::Guided ? "stclocker" : "random_baseline";
}
inline CampaignMode campaign_mode_from_name(const std::string& s) {
    if (s == "stclocker") return CampaignMode::Guided;
    if (s == "random_baseline") return CampaignMode::RandomBaseline;
    throw ConfigError("unknown mode '" + s + "'");
}
inline std::string oracle_mode_name(OracleMode m) {
    return m == OracleMode::WaitFor ? "waitfor" : "naive_timer";
}
inline OracleMode oracle_mode_from_name(const std::string& s) {
    if (s == "waitfor") return OracleMode::WaitFor;
    if (s == "naive_timer") return OracleMode::NaiveTimer;
    throw ConfigError("unknown oracle mode '" + s + "'");
}
inline std::string mutation_mode_name(MutationMode m) {
    switch (m) {
        case MutationMode::SpatialOnly: return "spatial_only";
        case MutationMode::TemporalOnly: return "temporal_only";
        default: return "full";
    }
}
inline MutationMode mutation_mode_from_name(const std::string& s) {
    if (s == "full") return MutationMode::Full;
    if (s == "spatial_only") return MutationMode::SpatialOnly;
    if (s == "temporal_only") return MutationMode::TemporalOnly;
    throw ConfigError("unknown mutation mode '" + s + "'");
}

struct CampaignConfig {
    MapId map_id = MapId::M1;
    std::string policy = "conservative_yield";
    int init_corpus_size = 8;  // K
    std::optional<std::uint64_t> iterations;
    std::optional<double> wall_clock_budget_s;
    CampaignMode mode = CampaignMode::Guided;
    OracleMode oracle = OracleMode::WaitFor;
    std::uint64_t seed = 1;
    double alpha = 0.5;
    double n_ti = 30.0;
    SimConfig sim;
    OracleConfig oracle_cfg;
    GenConfig gen;
};

inline void validate_config(const CampaignConfig& cfg) {
    if (cfg.iterations.has_value() == cfg.wall_clock_budget_s.has_value())
        throw ConfigError("exactly one of iterations / wall_clock_budget_s must be set");
    if (cfg.init_corpus_size < 1) throw ConfigError("init_corpus_size must be >= 1");
    if (cfg.gen.max_avs < 3) throw ConfigError("max_avs must be >= 3");
    if (cfg.gen.local_search_budget < 1) throw ConfigError("local_search_budget must be >= 1");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
    if (cfg.map_id == MapId::Custom) throw ConfigError("campaigns run on built-in maps m1..m4");
    lookup_policy(cfg.policy);
}

struct CorpusEntry {
    std::uint32_t id = 0;
    Scenario scenario;
    double phi = 1.0;
    double phi_spatial = 1.0;
    double phi_temporal = 1.0;
    std::vector<ConflictRegion> regions;
    std::optional<std::uint32_t> lineage;
    std::uint64_t obs_digest = 0;
};

/// FNV-1a over the raw state stream; ties a stored score to the exact
/// observation it was computed from.
inline std::uint64_t digest_observation(const Observation& obs) {
    std::uint64_t h = UINT64_C(0xcbf29ce484222325);
    const auto mix = [&](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= UINT64_C(0x100000001b3);
        }
    };
    mix(obs.dt);
    mix(obs.collision_flag ? 1.0 : 0.0);
    for (const Scene& scene : obs.scenes) {
        for (const auto& [id, st] : scene) {
            mix(static_cast<double>(id));
            mix(st.p.x);
            mix(st.p.y);
            mix(st.theta);
            mix(st.v);
            mix(st.a);
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Random scenario construction (initial corpus seeds and the random baseline)
// ---------------------------------------------------------------------------

inline std::optional<Scenario> random_scenario(const LaneGraph& graph, SplitMix64& rng,
                                               const CampaignConfig& cfg) {
    Scenario s;
    s.map_id = cfg.map_id;
    const std::size_t n_avs = 2 + rng.uniform_index(cfg.gen.max_avs - 1);
    std::vector<Vec2> occupied;

    for (std::size_t i = 0; i < n_avs; ++i) {
        std::optional<AVSpec> av;
        for (int tries = 0; tries < 20 && !av; ++tries)
            av = detail_gen::draw_candidate(graph, occupied, static_cast<AgentId>(i + 1), rng, cfg.gen);
        if (!av) return std::nullopt;
        occupied.push_back(av->p_start);
        s.avs.push_back(*av);
    }

    const std::size_t n_npcs = rng.uniform_index(4);  // 0..3
    for (std::size_t i = 0; i < n_npcs; ++i) {
        std::optional<AVSpec> seed;
        for (int tries = 0; tries < 20 && !seed; ++tries)
            seed = detail_gen::draw_candidate(graph, occupied, static_cast<AgentId>(1001 + i), rng, cfg.gen);
        if (!seed) continue;  // NPCs are optional garnish
        Route route;
        try {
            route = plan_route(graph, seed->p_start, seed->p_dest);
        } catch (const NoRouteError&) {
            continue;
        }
        if (route.total_length < 8.0) continue;
        NpcSpec npc;
        npc.id = seed->id;
        const double speed_factor = rng.uniform(0.4, 0.9);
        for (double arc = 0.0; arc < route.total_length + 4.0; arc += 8.0) {
            const double a = std::fmin(arc, route.total_length);
            double limit = 8.0;
            for (std::size_t k = 0; k < route.lane_sequence.size(); ++k) {
                if (a <= route.lane_end_arcs[k] + 1e-9) {
                    const Lane* lane = graph.lane_by_id(route.lane_sequence[k]);
                    if (lane) limit = lane->speed_limit;
                    break;
                }
            }
            Waypoint w;
            w.p = route.points.point_at(a);
            w.theta = route.points.heading_at(a);
            w.v = std::clamp(limit * speed_factor, 0.0, kMaxWaypointSpeed);
            if (!npc.waypoints.empty() && distance(npc.waypoints.back().p, w.p) < 1e-6) continue;
            npc.waypoints.push_back(w);
            if (a >= route.total_length) break;
        }
        if (npc.waypoints.size() < 2) continue;
        occupied.push_back(npc.waypoints.front().p);
        s.npcs.push_back(std::move(npc));
    }

    s.rng_seed = rng.next_u64();
    if (!validate(s, graph, cfg.gen.max_avs).empty()) return std::nullopt;
    return s;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

inline std::vector<CorpusEntry> init_corpus(const LaneGraph& graph, const CampaignConfig& cfg,
                                            SplitMix64& rng) {
    std::vector<CorpusEntry> corpus;
    const int K = cfg.init_corpus_size;
    int attempts = 0;
    while (corpus.size() < static_cast<std::size_t>(K)) {
        if (++attempts > 50 * K)
            throw InitExhaustedError("could not build " + std::to_string(K) + " non-collided seeds");
        auto scenario = random_scenario(graph, rng, cfg);
        if (!scenario) continue;
        Observation obs;
        try {
            obs = simulate(*scenario, graph, cfg.policy, cfg.sim);
        } catch (const std::runtime_error&) {
            continue;
        }
        if (obs.collision_flag) continue;
        FeedbackScore fb = feedback(obs, graph, cfg.alpha, cfg.n_ti);
        CorpusEntry entry;
        entry.id = static_cast<std::uint32_t>(corpus.size() + 1);
        entry.scenario = *scenario;
        entry.phi = fb.combined;
        entry.phi_spatial = fb.spatial;
        entry.phi_temporal = fb.temporal;
        entry.regions = std::move(fb.regions);
        entry.obs_digest = digest_observation(obs);
        corpus.push_back(std::move(entry));
    }
    return corpus;
}

/// Weighted seed selection: probability proportional to (1 - phi + 0.05),
/// so low-scoring (conflict-rich) entries are favored but none starve.
inline const CorpusEntry& select_seed(const std::vector<CorpusEntry>& corpus, SplitMix64& rng) {
    if (corpus.empty()) throw EmptyCorpusError("seed corpus is empty");
    double total = 0.0;
    for (const CorpusEntry& e : corpus) total += 1.0 - e.phi + 0.05;
    double u = rng.next_double() * total;
    for (const CorpusEntry& e : corpus) {
        u -= 1.0 - e.phi + 0.05;
        if (u <= 0.0) return e;
    }
    return corpus.back();
}

// ---------------------------------------------------------------------------
// Naive stuck-timer oracle (precision baseline): Fail as soon as any two AVs
// that have driven are simultaneously stationary for one detection window.
// ---------------------------------------------------------------------------

inline OracleVerdict naive_timer_evaluate(const Observation& obs, const OracleConfig& cfg = {}) {
    if (obs.collision_flag) throw CollidedObservationError("collided runs are never deadlocks");
    OracleVerdict verdict;
    const double t_end = obs.end_time();
    for (double t = cfg.delta_t; t <= t_end + 1e-9; t += 1.0) {
        std::vector<AgentId> stuck;
        for (AgentId id : obs.av_ids) {
            if (phi_stop(obs, id, std::fmin(t, t_end), cfg) &&
                detail::ever_moved_by(obs, id, t, cfg.prediction.v_move))
                stuck.push_back(id);
        }
        if (stuck.size() >= 2) {
            verdict.outcome = Outcome::Fail;
            verdict.cycle = stuck;
            verdict.t_detect = t;
            return verdict;
        }
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Campaign
// ---------------------------------------------------------------------------

struct IterationRecord {
    std::uint64_t iteration = 0;
    std::uint32_t scenario_id = 0;
    std::optional<std::uint32_t> parent_id;
    std::string operator_used;  // temporal | spatial | reseed | random
    std::string verdict;        // pass | fail | collision | error
    std::optional<double> phi_spatial;
    std::optional<double> phi_temporal;
    std::optional<double> phi;
    bool accepted = false;
    double wall_ms_sim = 0.0;
    double wall_ms_oracle = 0.0;
    double wall_ms_feedback = 0.0;
    double wall_ms_mutation = 0.0;
};

struct DlsRecord {
    std::uint64_t iteration = 0;
    std::uint32_t scenario_id = 0;
    Scenario scenario;
    OracleVerdict verdict;
};

struct StageTotals {
    double mutation_ms = 0.0;
    double simulation_ms = 0.0;
    double oracle_ms = 0.0;
    double feedback_ms = 0.0;
};

struct CampaignReport {
    std::vector<DlsRecord> dls;
    std::uint64_t iterations_run = 0;
    std::uint64_t discarded_collisions = 0;
    std::vector<IterationRecord> log;
    std::size_t corpus_size = 0;
    StageTotals timing;
};

/// Campaign loop: select a seed, mutate, simulate, judge, score, and grow
/// the corpus on strict feedback improvement. Failing scenarios go to the
/// DLS set and never back into the corpus. The random baseline draws a
/// fresh scenario every iteration with no feedback at all.
inline CampaignReport run_campaign(const CampaignConfig& cfg) {
    validate_config(cfg);
    const LaneGraph graph = build_builtin_map(cfg.map_id);
    SplitMix64 rng(cfg.seed);
    CampaignReport report;

    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto elapsed_s = [&]() {
        return std::chrono::duration<double>(Clock::now() - start).count();
    };
    const auto ms_since = [](Clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    std::vector<CorpusEntry> corpus;
    if (cfg.mode == CampaignMode::Guided) {
        const auto t0 = Clock::now();
        corpus = init_corpus(graph, cfg, rng);
        report.timing.simulation_ms += ms_since(t0);  // seed construction is mostly simulation
    }

    std::uint32_t next_id = static_cast<std::uint32_t>(corpus.size()) + 1;
    const auto budget_left = [&](std::uint64_t done) {
        if (cfg.iterations) return done < *cfg.iterations;
        return elapsed_s() < *cfg.wall_clock_budget_s;
    };

    for (std::uint64_t i = 0; budget_left(i); ++i) {
        IterationRecord row;
        row.iteration = i;
        row.scenario_id = next_id++;

        Scenario child;
        double parent_phi = 1.0;
        std::uint32_t parent_id = 0;
        {
            const auto t0 = Clock::now();
            if (cfg.mode == CampaignMode::Guided) {
                const CorpusEntry& parent = select_seed(corpus, rng);
                parent_phi = parent.phi;
                parent_id = parent.id;
                GenResult gen = generate(parent.scenario, parent.phi, parent.regions, graph, rng, cfg.gen);
                child = std::move(gen.scenario);
                row.operator_used = gen.operator_used;
                row.parent_id = parent_id;
            } else {
                row.operator_used = "random";
                std::optional<Scenario> drawn;
                for (int tries = 0; tries < 100 && !drawn; ++tries) drawn = random_scenario(graph, rng, cfg);
                if (!drawn) {
                    row.verdict = "error";
                    row.wall_ms_mutation = ms_since(t0);
                    report.log.push_back(std::move(row));
                    ++report.iterations_run;
                    continue;
                }
                child = std::move(*drawn);
            }
            row.wall_ms_mutation = ms_since(t0);
            report.timing.mutation_ms += row.wall_ms_mutation;
        }

        Observation obs;
        {
            const auto t0 = Clock::now();
            try {
                obs = simulate(child, graph, cfg.policy, cfg.sim);
            } catch (const std::runtime_error&) {
                row.verdict = "error";
                row.wall_ms_sim = ms_since(t0);
                report.timing.simulation_ms += row.wall_ms_sim;
                report.log.push_back(std::move(row));
                ++report.iterations_run;
                continue;
            }
            row.wall_ms_sim = ms_since(t0);
            report.timing.simulation_ms += row.wall_ms_sim;
        }

        if (obs.collision_flag) {
            row.verdict = "collision";
            ++report.discarded_collisions;
            report.log.push_back(std::move(row));
            ++report.iterations_run;
            continue;
        }

        OracleVerdict verdict;
        {
            const auto t0 = Clock::now();
            verdict = cfg.oracle == OracleMode::WaitFor ? evaluate(obs, cfg.oracle_cfg)
                                                        : naive_timer_evaluate(obs, cfg.oracle_cfg);
            row.wall_ms_oracle = ms_since(t0);
            report.timing.oracle_ms += row.wall_ms_oracle;
        }

        if (verdict.outcome == Outcome::Fail) {
            row.verdict = "fail";
            report.dls.push_back({i, row.scenario_id, child, verdict});
            report.log.push_back(std::move(row));
            ++report.iterations_run;
            continue;
        }

        row.verdict = "pass";
        if (cfg.mode == CampaignMode::Guided) {
            const auto t0 = Clock::now();
            FeedbackScore fb = feedback(obs, graph, cfg.alpha, cfg.n_ti);
            row.wall_ms_feedback = ms_since(t0);
            report.timing.feedback_ms += row.wall_ms_feedback;
            row.phi_spatial = fb.spatial;
            row.phi_temporal = fb.temporal;
            row.phi = fb.combined;
            if (fb.combined < parent_phi) {
                row.accepted = true;
                CorpusEntry entry;
                entry.id = row.scenario_id;
                entry.scenario = child;
                entry.phi = fb.combined;
                entry.phi_spatial = fb.spatial;
                entry.phi_temporal = fb.temporal;
                entry.regions = std::move(fb.regions);
                entry.lineage = parent_id;
                entry.obs_digest = digest_observation(obs);
                corpus.push_back(std::move(entry));
            }
        }
        report.log.push_back(std::move(row));
        ++report.iterations_run;
    }

    report.corpus_size = corpus.size();
    return report;
}

}  // namespace dlfuzz
