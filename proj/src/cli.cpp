#include "fieldloc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "fieldloc/config.hpp"
#include "fieldloc/errors.hpp"
#include "fieldloc/eval.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

namespace {

namespace fs = std::filesystem;

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw FormatError("input file not found: '" + path + "'");
}

void require_writable(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw FormatError("output directory does not exist: '" + parent.string() + "'");
    }
}

Config config_from(const std::string& path, std::ostream& err) {
    if (path.empty()) return Config{};
    require_file(path);
    return load_config(path, &err);
}

// Ground truth in GT format, or an EST trajectory.
Trajectory read_reference(const std::string& path) {
    std::ifstream probe = text::open_in(path);
    std::string first;
    probe >> first;
    if (first == "EST") return read_trajectory_file(path);
    return truth_trajectory(read_ground_truth_file(path));
}

struct Args {
    std::string config, out, log, dem, truth, est, init, graph, report, masks, cues;
    long long seed = -1;
    bool online = false;
    bool no_online = false;
    bool timing = false;
};

void write_step_report(const std::string& path, const std::vector<StepReport>& steps, bool timing) {
    auto out = text::open_out(path);
    out << "node,window_begin,window_nodes,window_factors,iterations,initial_chi2,final_chi2,converged";
    if (timing) out << ",wall_time";
    out << '\n';
    for (const auto& s : steps) {
        out << s.node << ',' << s.window_begin << ',' << s.window_nodes << ',' << s.window_factors << ','
            << s.solve.iterations << ',' << text::fmt(s.solve.initial_chi2) << ',' << text::fmt(s.solve.final_chi2)
            << ',' << (s.solve.converged ? 1 : 0);
        if (timing) out << ',' << text::fmt(s.solve.wall_time);
        out << '\n';
    }
}

void cmd_simulate(const Args& a, std::ostream& err) {
    Config c = config_from(a.config, err);
    if (a.seed >= 0) c.field.seed = static_cast<std::uint64_t>(a.seed);
    fs::create_directories(a.out);
    const SimOutput sim = simulate(c.field, c.noise);
    const fs::path dir(a.out);
    write_sensor_log_file((dir / "sensors.log").string(), sim.log);
    write_dem_file((dir / "dem.txt").string(), sim.dem);
    write_ground_truth_file((dir / "truth.gt").string(), sim.truth.samples);
}

struct Inputs {
    Config config;
    SensorLog log;
    std::optional<DemGrid> dem;
};

Inputs load_inputs(const Args& a, std::ostream& err) {
    require_file(a.log);
    if (!a.dem.empty()) require_file(a.dem);
    require_writable(a.out);
    Inputs in;
    in.config = config_from(a.config, err);
    if (!a.cues.empty()) in.config.pipeline.cues = CueMask::parse(a.cues);
    in.log = read_sensor_log_file(a.log, &err);
    if (!a.dem.empty()) in.dem = read_dem_file(a.dem);
    return in;
}

void cmd_optimize(const Args& a, std::ostream& err) {
    if (!a.init.empty()) require_file(a.init);
    if (!a.graph.empty()) require_writable(a.graph);
    Inputs in = load_inputs(a, err);
    const DemGrid* dem = in.dem ? &*in.dem : nullptr;
    std::optional<Trajectory> init;
    if (!a.init.empty()) {
        init = read_trajectory_file(a.init);
    } else if (!a.no_online) {
        init = run_online(in.log, in.config.pipeline, dem).trajectory;
    }
    const BatchResult res = run_batch(in.log, in.config.pipeline, dem, init ? &*init : nullptr);
    write_trajectory_file(a.out, res.trajectory);
    if (!a.graph.empty()) write_graph_file(a.graph, res.graph);
    err << "batch: " << res.graph.size() << " nodes, " << res.graph.factors().size() << " factors, "
        << res.report.iterations << " iterations, chi2 " << res.report.initial_chi2 << " -> "
        << res.report.final_chi2 << ", " << res.report.wall_time << " s\n";
}

void cmd_online(const Args& a, std::ostream& err) {
    if (!a.report.empty()) require_writable(a.report);
    Inputs in = load_inputs(a, err);
    const OnlineResult res = run_online(in.log, in.config.pipeline, in.dem ? &*in.dem : nullptr);
    write_trajectory_file(a.out, res.trajectory);
    if (!a.report.empty()) write_step_report(a.report, res.steps, a.timing);
}

void cmd_ablate(const Args& a, std::ostream& err) {
    require_file(a.truth);
    Inputs in = load_inputs(a, err);
    const auto masks = parse_mask_list(a.masks);
    const Trajectory truth = read_reference(a.truth);
    const auto rows = ablation_table(in.log, in.dem ? &*in.dem : nullptr, truth, masks, in.config.pipeline, a.online);
    write_stats_csv_file(a.out, rows);
}

void cmd_eval(const Args& a) {
    require_file(a.est);
    require_file(a.truth);
    require_writable(a.out);
    const RunStats s = compute_stats(read_trajectory_file(a.est), read_reference(a.truth));
    write_stats_csv_file(a.out, {{"-", "eval", s}});
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"fieldloc: multi-cue pose-graph localization for row-crop fields"};
    app.require_subcommand(1, 1);
    Args a;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic field: sensors.log, dem.txt, truth.gt");
    sim->add_option("--config", a.config, "key = value configuration file (defaults when omitted)");
    sim->add_option("--out", a.out, "output directory (created if missing)")->required();
    sim->add_option("--seed", a.seed, "random seed, overrides the config's seed (default 1)");

    auto* opt = app.add_subcommand("optimize", "full-graph optimization; by default seeded by an online pass");
    auto* onl = app.add_subcommand("online", "sliding-window optimization after every node");
    auto* abl = app.add_subcommand("ablate", "error statistics for a list of cue masks, as CSV");
    for (auto* sc : {opt, onl, abl}) {
        sc->add_option("--log", a.log, "sensor log")->required();
        sc->add_option("--dem", a.dem, "elevation grid (DEM cue is skipped without one)");
        sc->add_option("--config", a.config, "key = value configuration file");
        sc->add_option("--out", a.out, sc == abl ? "output CSV" : "output EST trajectory")->required();
    }
    for (auto* sc : {opt, onl}) {
        sc->add_option("--cues", a.cues, "plus-joined cue mask, or ALL (default ALL)");
    }
    opt->add_option("--init", a.init, "initial EST trajectory (skips the online pass)");
    opt->add_option("--graph", a.graph, "write the optimized graph dump here");
    opt->add_flag("--no-online", a.no_online, "initialise by dead reckoning instead of an online pass");
    onl->add_option("--report", a.report, "per-step CSV report");
    onl->add_flag("--timing", a.timing, "include wall-clock seconds in the report");
    abl->add_option("--truth", a.truth, "ground truth (GT or EST lines)")->required();
    abl->add_option("--masks", a.masks, "semicolon-separated cue masks, e.g. \"GPS;GPS+WO;ALL\"")->required();
    abl->add_flag("--online", a.online, "add an online row after each batch row");

    auto* ev = app.add_subcommand("eval", "error statistics of one trajectory, as CSV");
    ev->add_option("--est", a.est, "estimated EST trajectory")->required();
    ev->add_option("--truth", a.truth, "ground truth (GT or EST lines)")->required();
    ev->add_option("--out", a.out, "output CSV")->required();

    app.footer("Configuration keys and defaults:\n" + config_reference() +
               "Exit codes: 0 ok, 1 usage, 2 data or format error, 3 solver failure.");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(std::move(rev));
    } catch (const CLI::Success&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }
    try {
        if (!a.cues.empty()) CueMask::parse(a.cues);
        if (!a.masks.empty()) parse_mask_list(a.masks);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (*sim) cmd_simulate(a, err);
        if (*opt) cmd_optimize(a, err);
        if (*onl) cmd_online(a, err);
        if (*abl) cmd_ablate(a, err);
        if (*ev) cmd_eval(a);
    } catch (const LinearSolveFailure& e) {
        err << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace fieldloc
