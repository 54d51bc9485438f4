#pragma once

#include <cstdio>
#include <string>

#include "dlfuzz/conflict_feedback.hpp"
#include "dlfuzz/deadlock_oracle.hpp"
#include "dlfuzz/fuzzer.hpp"
#include "dlfuzz/json_io.hpp"

namespace dlfuzz {

inline json verdict_to_json(const OracleVerdict& v) {
    json j;
    j["outcome"] = v.outcome == Outcome::Fail ? "Fail" : "Pass";
    j["cycle"] = v.cycle ? json(*v.cycle) : json(nullptr);
    j["t_detect"] = v.t_detect ? json(*v.t_detect) : json(nullptr);
    json graphs = json::array();
    for (const WaitForGraph& g : v.graphs) {
        json edges = json::array();
        for (const auto& [a, b] : g.edges) edges.push_back(json::array({a, b}));
        graphs.push_back({{"t", g.t}, {"edges", std::move(edges)}});
    }
    j["graphs"] = std::move(graphs);
    return j;
}

inline json region_to_json(const ConflictRegion& r) {
    json arrivals = json::object();
    for (const auto& [id, info] : r.arrivals)
        arrivals[std::to_string(id)] = {{"t", info.t}, {"v", info.v}};
    return {{"point", io::point_json(r.point)}, {"involved", r.involved}, {"arrivals", std::move(arrivals)}};
}

inline json feedback_to_json(const FeedbackScore& fb) {
    json j;
    j["spatial"] = fb.spatial;
    j["temporal"] = fb.temporal;
    j["combined"] = fb.combined;
    j["raw_intersections"] = fb.raw_count;
    json regions = json::array();
    for (const ConflictRegion& r : fb.regions) regions.push_back(region_to_json(r));
    j["regions"] = std::move(regions);
    return j;
}

inline json campaign_config_to_json(const CampaignConfig& cfg) {
    json j;
    j["map_id"] = map_id_name(cfg.map_id);
    j["policy"] = cfg.policy;
    j["mode"] = campaign_mode_name(cfg.mode);
    j["oracle"] = oracle_mode_name(cfg.oracle);
    j["seed"] = cfg.seed;
    j["init_corpus_size"] = cfg.init_corpus_size;
    if (cfg.iterations) j["iterations"] = *cfg.iterations;
    if (cfg.wall_clock_budget_s) j["wall_clock_budget_s"] = *cfg.wall_clock_budget_s;
    j["alpha"] = cfg.alpha;
    j["n_ti"] = cfg.n_ti;
    j["mutation_mode"] = mutation_mode_name(cfg.gen.mode);
    j["sim"] = {{"dt", cfg.sim.dt},
                {"horizon", cfg.sim.horizon},
                {"collision_distance", cfg.sim.collision_distance},
                {"stationary_timeout", cfg.sim.stationary_timeout}};
    j["oracle_cfg"] = {{"eps_v", cfg.oracle_cfg.eps_v},
                       {"delta_t", cfg.oracle_cfg.delta_t},
                       {"d_eps", cfg.oracle_cfg.d_eps},
                       {"tau_eps", cfg.oracle_cfg.tau_eps},
                       {"horizon", cfg.oracle_cfg.horizon}};
    j["prediction"] = {{"process_noise", cfg.oracle_cfg.prediction.process_noise},
                       {"measurement_noise", cfg.oracle_cfg.prediction.measurement_noise},
                       {"v_move", cfg.oracle_cfg.prediction.v_move}};
    j["gen"] = {{"max_avs", cfg.gen.max_avs},
                {"local_search_budget", cfg.gen.local_search_budget},
                {"trigger_min", cfg.gen.trigger_min},
                {"trigger_max", cfg.gen.trigger_max},
                {"waypoint_pos_jitter", cfg.gen.waypoint_pos_jitter},
                {"waypoint_speed_jitter", cfg.gen.waypoint_speed_jitter}};
    return j;
}

/// Deterministic report body: everything except wall-clock timings, which
/// live in the iteration CSV. Identical configs serialize byte-identically.
inline json report_to_json(const CampaignReport& report, const CampaignConfig& cfg) {
    json j;
    j["config"] = campaign_config_to_json(cfg);
    j["iterations_run"] = report.iterations_run;
    j["discarded_collisions"] = report.discarded_collisions;
    j["corpus_size"] = report.corpus_size;
    json dls = json::array();
    for (const DlsRecord& d : report.dls) {
        dls.push_back({{"iteration", d.iteration},
                       {"scenario_id", d.scenario_id},
                       {"scenario", scenario_to_json(d.scenario)},
                       {"verdict", verdict_to_json(d.verdict)}});
    }
    j["dls"] = std::move(dls);
    json rows = json::array();
    for (const IterationRecord& r : report.log) {
        rows.push_back({{"iteration", r.iteration},
                        {"scenario_id", r.scenario_id},
                        {"parent_id", r.parent_id ? json(*r.parent_id) : json(nullptr)},
                        {"operator", r.operator_used},
                        {"verdict", r.verdict},
                        {"phi_spatial", r.phi_spatial ? json(*r.phi_spatial) : json(nullptr)},
                        {"phi_temporal", r.phi_temporal ? json(*r.phi_temporal) : json(nullptr)},
                        {"phi", r.phi ? json(*r.phi) : json(nullptr)},
                        {"accepted", r.accepted}});
    }
    j["iterations"] = std::move(rows);
    return j;
}

inline std::string iteration_csv(const CampaignReport& report) {
    std::string out =
        "iteration,scenario_id,operator,verdict,phi_spatial,phi_temporal,phi,accepted,"
        "wall_ms_sim,wall_ms_oracle,wall_ms_feedback,wall_ms_mutation\n";
    char buf[64];
    const auto num = [&](std::optional<double> v) -> std::string {
        if (!v) return "";
        std::snprintf(buf, sizeof buf, "%.9g", *v);
        return buf;
    };
    const auto ms = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    for (const IterationRecord& r : report.log) {
        out += std::to_string(r.iteration) + "," + std::to_string(r.scenario_id) + "," + r.operator_used +
               "," + r.verdict + "," + num(r.phi_spatial) + "," + num(r.phi_temporal) + "," + num(r.phi) +
               "," + (r.accepted ? "true" : "false") + "," + ms(r.wall_ms_sim) + "," + ms(r.wall_ms_oracle) +
               "," + ms(r.wall_ms_feedback) + "," + ms(r.wall_ms_mutation) + "\n";
    }
    return out;
}

}  // namespace dlfuzz
