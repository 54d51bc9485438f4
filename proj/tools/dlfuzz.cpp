// dlfuzz: search-based deadlock testing for multi-vehicle traffic scenarios.
//
// Subcommands:
//   fuzz    run a campaign, write report.json + iterations.csv + dls/*.json
//   replay  simulate and judge one scenario file (optionally render an SVG)
//   score   print the conflict-feedback scores of an observation file
//   oracle  print the deadlock verdict of an observation file
//
// Exit codes: 0 success, 2 usage/config error, 3 input-data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "dlfuzz/fuzzer.hpp"
#include "dlfuzz/json_report.hpp"
#include "dlfuzz/log.hpp"
#include "dlfuzz/svg_render.hpp"

namespace fs = std::filesystem;
using namespace dlfuzz;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path, e.what());
    }
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) throw ParseError(where + "." + it.key(), "unknown key");
    }
}

CampaignConfig config_from_json(const json& j) {
    CampaignConfig cfg;
    reject_unknown_keys(j, {"map_id", "policy", "mode", "oracle", "seed", "init_corpus_size",
                            "iterations", "wall_clock_budget_s", "alpha", "n_ti", "mutation_mode",
                            "sim", "oracle_cfg", "prediction", "gen"},
                        "config");
    if (j.count("map_id")) cfg.map_id = map_id_from_name(j.at("map_id").get<std::string>());
    if (j.count("policy")) cfg.policy = j.at("policy").get<std::string>();
    if (j.count("mode")) cfg.mode = campaign_mode_from_name(j.at("mode").get<std::string>());
    if (j.count("oracle")) cfg.oracle = oracle_mode_from_name(j.at("oracle").get<std::string>());
    if (j.count("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.count("init_corpus_size")) cfg.init_corpus_size = j.at("init_corpus_size").get<int>();
    if (j.count("iterations")) cfg.iterations = j.at("iterations").get<std::uint64_t>();
    if (j.count("wall_clock_budget_s")) cfg.wall_clock_budget_s = j.at("wall_clock_budget_s").get<double>();
    if (j.count("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.count("n_ti")) cfg.n_ti = j.at("n_ti").get<double>();
    if (j.count("mutation_mode")) cfg.gen.mode = mutation_mode_from_name(j.at("mutation_mode").get<std::string>());
    if (j.count("sim")) {
        const json& s = j.at("sim");
        reject_unknown_keys(s, {"dt", "horizon", "collision_distance", "stationary_timeout"}, "config.sim");
        if (s.count("dt")) cfg.sim.dt = s.at("dt").get<double>();
        if (s.count("horizon")) cfg.sim.horizon = s.at("horizon").get<double>();
        if (s.count("collision_distance")) cfg.sim.collision_distance = s.at("collision_distance").get<double>();
        if (s.count("stationary_timeout")) cfg.sim.stationary_timeout = s.at("stationary_timeout").get<double>();
    }
    if (j.count("oracle_cfg")) {
        const json& o = j.at("oracle_cfg");
        reject_unknown_keys(o, {"eps_v", "delta_t", "d_eps", "tau_eps", "horizon"}, "config.oracle_cfg");
        if (o.count("eps_v")) cfg.oracle_cfg.eps_v = o.at("eps_v").get<double>();
        if (o.count("delta_t")) cfg.oracle_cfg.delta_t = o.at("delta_t").get<double>();
        if (o.count("d_eps")) cfg.oracle_cfg.d_eps = o.at("d_eps").get<double>();
        if (o.count("tau_eps")) cfg.oracle_cfg.tau_eps = o.at("tau_eps").get<double>();
        if (o.count("horizon")) cfg.oracle_cfg.horizon = o.at("horizon").get<double>();
    }
    if (j.count("prediction")) {
        const json& p = j.at("prediction");
        reject_unknown_keys(p, {"process_noise", "measurement_noise", "v_move"}, "config.prediction");
        if (p.count("process_noise")) cfg.oracle_cfg.prediction.process_noise = p.at("process_noise").get<double>();
        if (p.count("measurement_noise"))
            cfg.oracle_cfg.prediction.measurement_noise = p.at("measurement_noise").get<double>();
        if (p.count("v_move")) cfg.oracle_cfg.prediction.v_move = p.at("v_move").get<double>();
    }
    if (j.count("gen")) {
        const json& g = j.at("gen");
        reject_unknown_keys(g,
                            {"max_avs", "local_search_budget", "trigger_min", "trigger_max",
                             "waypoint_pos_jitter", "waypoint_speed_jitter"},
                            "config.gen");
        if (g.count("max_avs")) cfg.gen.max_avs = g.at("max_avs").get<std::size_t>();
        if (g.count("local_search_budget")) cfg.gen.local_search_budget = g.at("local_search_budget").get<std::size_t>();
        if (g.count("trigger_min")) cfg.gen.trigger_min = g.at("trigger_min").get<double>();
        if (g.count("trigger_max")) cfg.gen.trigger_max = g.at("trigger_max").get<double>();
        if (g.count("waypoint_pos_jitter")) cfg.gen.waypoint_pos_jitter = g.at("waypoint_pos_jitter").get<double>();
        if (g.count("waypoint_speed_jitter"))
            cfg.gen.waypoint_speed_jitter = g.at("waypoint_speed_jitter").get<double>();
    }
    return cfg;
}

struct FuzzFlags {
    std::string config_path;
    std::string out_dir = "dlfuzz-out";
    std::string map, policy, mode, oracle, mutation;
    std::uint64_t seed = 0;
    std::uint64_t iterations = 0;
    bool seed_set = false, iterations_set = false;
};

int cmd_fuzz(const FuzzFlags& flags) {
    CampaignConfig cfg;
    if (!flags.config_path.empty()) cfg = config_from_json(load_json_file(flags.config_path));
    // flag > config file > built-in default, per field
    if (!flags.map.empty()) cfg.map_id = map_id_from_name(flags.map);
    if (!flags.policy.empty()) cfg.policy = flags.policy;
    if (!flags.mode.empty()) cfg.mode = campaign_mode_from_name(flags.mode);
    if (!flags.oracle.empty()) cfg.oracle = oracle_mode_from_name(flags.oracle);
    if (!flags.mutation.empty()) cfg.gen.mode = mutation_mode_from_name(flags.mutation);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.iterations_set) {
        cfg.iterations = flags.iterations;
        cfg.wall_clock_budget_s.reset();
    }
    if (!cfg.iterations && !cfg.wall_clock_budget_s) cfg.iterations = 100;
    validate_config(cfg);

    const fs::path out(flags.out_dir);
    fs::create_directories(out / "dls");
    const fs::path marker = out / ".partial";
    write_file(marker, "campaign in progress\n");

    log_info("campaign: map=" + map_id_name(cfg.map_id) + " policy=" + cfg.policy +
             " mode=" + campaign_mode_name(cfg.mode) + " seed=" + std::to_string(cfg.seed));
    const CampaignReport report = run_campaign(cfg);

    write_file(out / "report.json", report_to_json(report, cfg).dump(1) + "\n");
    write_file(out / "iterations.csv", iteration_csv(report));
    for (const DlsRecord& d : report.dls) {
        char name[64];
        std::snprintf(name, sizeof name, "dls_%05llu.json", static_cast<unsigned long long>(d.iteration));
        write_file(out / "dls" / name, scenario_to_json(d.scenario).dump(1) + "\n");
    }
    fs::remove(marker);

    log_info("done: " + std::to_string(report.iterations_run) + " iterations, " +
             std::to_string(report.dls.size()) + " deadlock scenarios, " +
             std::to_string(report.discarded_collisions) + " collisions discarded");
    std::cout << "dls=" << report.dls.size() << " iterations=" << report.iterations_run
              << " out=" << out.string() << "\n";
    return kExitOk;
}

int cmd_replay(const std::string& scenario_path, const std::string& policy, const std::string& oracle,
               const std::string& config_path, const std::string& out_dir, bool svg) {
    CampaignConfig cfg;
    cfg.sim.horizon = 60.0;
    if (!config_path.empty()) cfg = config_from_json(load_json_file(config_path));
    const Scenario scenario = scenario_from_json(load_json_file(scenario_path));
    const LaneGraph graph = build_builtin_map(scenario.map_id);
    const Observation obs = simulate(scenario, graph, policy, cfg.sim);
    if (obs.collision_flag) {
        std::cerr << "collision between agents " << obs.collided_pair->first << " and "
                  << obs.collided_pair->second << "; no verdict\n";
        return kExitData;
    }
    const OracleVerdict verdict =
        oracle == "naive_timer" ? naive_timer_evaluate(obs, cfg.oracle_cfg) : evaluate(obs, cfg.oracle_cfg);
    const FeedbackScore fb = feedback(obs, graph, cfg.alpha, cfg.n_ti);
    std::cout << verdict_to_json(verdict).dump(1) << "\n";
    if (svg) {
        const fs::path out(out_dir);
        fs::create_directories(out);
        write_file(out / "replay.svg", render_svg(graph, obs, fb.regions, verdict));
        log_info("wrote " + (out / "replay.svg").string());
    }
    return kExitOk;
}

int cmd_score(const std::string& obs_path) {
    const Observation obs = observation_from_json(load_json_file(obs_path));
    const LaneGraph graph = build_builtin_map(obs.map_id);
    std::cout << feedback_to_json(feedback(obs, graph)).dump(1) << "\n";
    return kExitOk;
}

int cmd_oracle(const std::string& obs_path, const std::string& oracle) {
    const Observation obs = observation_from_json(load_json_file(obs_path));
    const OracleVerdict verdict = oracle == "naive_timer" ? naive_timer_evaluate(obs) : evaluate(obs);
    std::cout << verdict_to_json(verdict).dump(1) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"search-based deadlock scenario fuzzer"};
    app.require_subcommand(1);

    FuzzFlags fuzz_flags;
    auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
    fuzz->add_option("--config", fuzz_flags.config_path, "campaign config JSON");
    fuzz->add_option("--out", fuzz_flags.out_dir, "output directory");
    fuzz->add_option("--map", fuzz_flags.map, "m1|m2|m3|m4");
    fuzz->add_option("--policy", fuzz_flags.policy, "conservative_yield|priority_tiebreak");
    fuzz->add_option("--mode", fuzz_flags.mode, "stclocker|random_baseline");
    fuzz->add_option("--oracle", fuzz_flags.oracle, "waitfor|naive_timer");
    fuzz->add_option("--mutation", fuzz_flags.mutation, "full|spatial_only|temporal_only");
    auto* seed_opt = fuzz->add_option("--seed", fuzz_flags.seed, "master seed");
    auto* iter_opt = fuzz->add_option("--iterations", fuzz_flags.iterations, "iteration budget");

    std::string replay_scenario, replay_policy = "conservative_yield", replay_oracle = "waitfor";
    std::string replay_out = ".", replay_config;
    bool replay_svg = false;
    auto* replay = app.add_subcommand("replay", "simulate and judge one scenario");
    replay->add_option("scenario", replay_scenario, "scenario JSON path")->required();
    replay->add_option("--policy", replay_policy, "policy under test");
    replay->add_option("--oracle", replay_oracle, "waitfor|naive_timer");
    replay->add_option("--config", replay_config, "campaign config for sim/oracle settings");
    replay->add_option("--out", replay_out, "directory for --svg output");
    replay->add_flag("--svg", replay_svg, "render trajectories to replay.svg");

    std::string score_obs;
    auto* score = app.add_subcommand("score", "conflict-feedback scores of an observation");
    score->add_option("observation", score_obs, "observation JSON path")->required();

    std::string oracle_obs, oracle_mode = "waitfor";
    auto* oracle = app.add_subcommand("oracle", "deadlock verdict of an observation");
    oracle->add_option("observation", oracle_obs, "observation JSON path")->required();
    oracle->add_option("--oracle", oracle_mode, "waitfor|naive_timer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    fuzz_flags.seed_set = seed_opt->count() > 0;
    fuzz_flags.iterations_set = iter_opt->count() > 0;

    try {
        if (fuzz->parsed()) return cmd_fuzz(fuzz_flags);
        if (replay->parsed())
            return cmd_replay(replay_scenario, replay_policy, replay_oracle, replay_config, replay_out, replay_svg);
        if (score->parsed()) return cmd_score(score_obs);
        if (oracle->parsed()) return cmd_oracle(oracle_obs, oracle_mode);
    } catch (const CollidedObservationError& e) {
        log_error(e.what());
        return kExitData;
    } catch (const ParseError& e) {
        log_error(e.what());
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        log_error(e.what());
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        log_error(e.what());
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
