#include "jetpref/cli.hpp"

#include "jetpref/config.hpp"
#include "jetpref/elicit.hpp"
#include "jetpref/error.hpp"
#include "jetpref/experiment.hpp"
#include "jetpref/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

namespace jetpref {

namespace {

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string task;
    std::string model;
    std::string out;
};

struct CliState {
    CommonOptions common;
    bool quiet = false;
    bool evaluate = false;
    // sweep
    std::string axis = "k_max";
    std::vector<double> values;
    int repeats = 5;
    int jobs = 1;
    // eval / explain / export
    std::string run_dir;
    std::string checkpoint;
    std::string graph_file;
    std::optional<int> trajectory;
    bool json = false;
    std::string kind = "transitions";
    // serve
    std::string data_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
};

void add_common(CLI::App& sub, CommonOptions& c, bool with_out = true) {
    sub.add_option("--config", c.config_file, "config file of 'key = value' lines");
    sub.add_option("--set", c.sets, "override a config key (key=value), repeatable")->allow_extra_args(false);
    sub.add_option("--seed", c.seed, "base seed (same as --set seed=N)");
    sub.add_option("--task", c.task, "follow | chase | land (same as --set task=...)");
    sub.add_option("--model", c.model, "tree-0-1 | tree-variance | reward-nn (same as --set model=...)");
    if (with_out) sub.add_option("--out", c.out, "output directory (default: timestamped under $" + std::string(kOutputRootEnv) + ")");
}

ExperimentConfig build_config(const CommonOptions& c) {
    ExperimentConfig cfg;
    if (!c.config_file.empty()) cfg = load_config_file(c.config_file, cfg);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        std::string key = s.substr(0, eq);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        set_config_value(cfg, key, s.substr(eq + 1));
    }
    if (!c.task.empty()) set_config_value(cfg, "task", c.task);
    if (!c.model.empty()) set_config_value(cfg, "model", c.model);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

std::filesystem::path output_dir(const CommonOptions& c, const std::string& label) {
    if (!c.out.empty()) return c.out;
    const char* env = std::getenv(kOutputRootEnv);
    const std::filesystem::path root = env && *env ? env : "runs";
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const std::string base = label + "-" + stamp;
    std::filesystem::path dir = root / base;
    for (int k = 2; std::filesystem::exists(dir); ++k) dir = root / (base + "-" + std::to_string(k));
    return dir;
}

void write_config_snapshot(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "config.txt");
    if (!out) throw InputError("cannot write " + (dir / "config.txt").string());
    out << config_to_text(cfg);
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json evaluation_json(const RunEvaluation& ev, const EvalContext& ctx) {
    return Json{{"orr", ev.orr},
                {"model_mean", ev.model_mean},
                {"oracle_mean", ctx.oracle_mean},
                {"random_mean", ctx.random_mean},
                {"reward_correlation", optional_json(ev.correlation)},
                {"kendall_tau", optional_json(ev.kendall)},
                {"altitude_violation_fraction", ev.altitude_violation_fraction},
                {"returns", ev.returns}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

RewardTree load_tree(const std::filesystem::path& path) {
    try {
        return RewardTree::load_file(path);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": not a reward tree checkpoint (" + e.what() + ")");
    }
}

std::string seed_label(const ExperimentConfig& cfg) { return "seed" + std::to_string(cfg.seed); }

int cmd_pretrain(const CliState& st, std::ostream& out) {
    ExperimentConfig cfg = build_config(st.common);
    const auto dir = output_dir(st.common, "dynamics-" + std::string(task_name(cfg.task)));
    write_config_snapshot(cfg, dir);
    const auto data = collect_random_transitions(cfg.task, cfg.dynamics.transitions,
                                                 derive_seed(cfg.dynamics.seed, "transitions"));
    const auto ens = DynamicsEnsemble::train(data, cfg.dynamics);
    ens.save_file(dir / "dynamics.json");
    const auto holdout = collect_random_transitions(cfg.task, 2000, derive_seed(cfg.dynamics.seed, "holdout"));
    for (int m = 0; m < ens.members(); ++m) {
        out << "member " << m << ": held-out mse " << ens.mse(holdout, m) << '\n';
    }
    out << "dynamics written to " << (dir / "dynamics.json").string() << '\n';
    return kExitOk;
}

int cmd_run(const CliState& st, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg = build_config(st.common);
    const auto dir = output_dir(st.common, "run-" + std::string(task_name(cfg.task)) + "-" +
                                               std::string(model_type_name(cfg.model)) + "-" + seed_label(cfg));
    if (cfg.evaluator != EvaluatorKind::Oracle) {
        throw ConfigError("evaluator: 'run' needs the oracle evaluator; use 'serve' for human labels");
    }
    std::filesystem::create_directories(dir);
    const auto dynamics = make_dynamics(cfg);
    OnlineLoop loop(cfg, dynamics);
    loop.set_artifact_dir(dir);
    while (!loop.finished()) {
        loop.begin_episode();
        loop.complete_episode(loop.oracle_labels(), LabelSource::Oracle);
        const auto& r = loop.records().back();
        if (!st.quiet && (r.episode % 10 == 0 || r.episode == 1 || r.episode == cfg.n_max)) {
            err << "episode " << r.episode << "/" << cfg.n_max << ": return " << r.online_return << ", edges "
                << r.edges << ", leaves " << r.leaves << ", l0-1 " << r.loss_count << '\n';
        }
    }
    const RunArtifacts run{cfg, loop.records(), loop.graph(), std::make_shared<LearnedModel>(loop.model()),
                           loop.oracle_beta()};
    write_artifacts(run, dir);
    if (st.evaluate) {
        const EvalContext ctx = make_eval_context(cfg, *dynamics);
        const RunEvaluation ev = evaluate_run(*run.model->reward_model(), cfg, ctx, *dynamics);
        write_text(dir / "eval.json", evaluation_json(ev, ctx).dump(2) + "\n");
        out << "orr " << ev.orr << '\n';
    }
    out << "run written to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_sweep(const CliState& st, std::ostream& out) {
    ExperimentConfig cfg = build_config(st.common);
    const SweepAxis axis = parse_sweep_axis(st.axis);
    if (st.values.empty()) throw ConfigError("--values: at least one value is required");
    const auto dir = output_dir(st.common, "sweep-" + std::string(task_name(cfg.task)) + "-" + st.axis);
    write_config_snapshot(cfg, dir);
    const SweepResult res = sensitivity_sweep(cfg, axis, st.values, st.repeats, st.jobs);
    {
        std::ofstream f(dir / "sweep.tsv");
        write_sweep_tsv(res, axis, f);
    }
    {
        std::ofstream f(dir / "sweep_summary.tsv");
        write_sweep_summary_tsv(res, axis, f);
    }
    write_sweep_summary_tsv(res, axis, out);
    out << "sweep written to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_eval(const CliState& st, std::ostream& out) {
    CommonOptions common = st.common;
    std::filesystem::path checkpoint = st.checkpoint;
    if (!st.run_dir.empty()) {
        if (common.config_file.empty()) common.config_file = (std::filesystem::path(st.run_dir) / "config.txt").string();
        if (checkpoint.empty()) checkpoint = std::filesystem::path(st.run_dir) / "model.json";
    }
    if (checkpoint.empty()) throw ConfigError("--checkpoint (or --run) is required");
    const ExperimentConfig cfg = build_config(common);
    const RewardModelPtr model = load_reward_model(checkpoint);
    const auto dynamics = make_dynamics(cfg);
    const EvalContext ctx = make_eval_context(cfg, *dynamics);
    const RunEvaluation ev = evaluate_run(*model, cfg, ctx, *dynamics);
    const Json j = evaluation_json(ev, ctx);
    if (!st.common.out.empty()) {
        std::filesystem::create_directories(st.common.out);
        write_text(std::filesystem::path(st.common.out) / "eval.json", j.dump(2) + "\n");
    }
    out << j.dump(2) << '\n';
    return kExitOk;
}

int cmd_explain(const CliState& st, std::ostream& out) {
    std::filesystem::path tree_path = st.checkpoint;
    std::filesystem::path graph_path = st.graph_file;
    if (!st.run_dir.empty()) {
        if (tree_path.empty()) tree_path = std::filesystem::path(st.run_dir) / "model.json";
        if (graph_path.empty()) graph_path = std::filesystem::path(st.run_dir) / "graph.jsonl";
    }
    if (tree_path.empty()) throw ConfigError("--tree (or --run) is required");
    const RewardTree tree = load_tree(tree_path);
    if (!st.trajectory) {
        if (st.json) {
            out << tree.to_json().dump(2) << '\n';
        } else {
            out << tree.render_text();
        }
        return kExitOk;
    }
    if (graph_path.empty()) throw ConfigError("--graph (or --run) is required with --trajectory");
    const PreferenceGraph graph = PreferenceGraph::load_file(graph_path);
    if (!graph.contains(*st.trajectory)) throw InputError("unknown trajectory " + std::to_string(*st.trajectory));
    const Explanation ex = explain_trajectory(tree, graph.trajectory(*st.trajectory));
    if (st.json) {
        out << ex.to_json().dump(2) << '\n';
    } else {
        out << ex.render_text();
    }
    return kExitOk;
}

int cmd_export(const CliState& st, std::ostream& out) {
    std::filesystem::path graph_path = st.graph_file;
    std::filesystem::path tree_path = st.checkpoint;
    if (!st.run_dir.empty()) {
        if (graph_path.empty()) graph_path = std::filesystem::path(st.run_dir) / "graph.jsonl";
        if (tree_path.empty()) tree_path = std::filesystem::path(st.run_dir) / "model.json";
    }
    std::ofstream file;
    if (!st.common.out.empty()) {
        file.open(st.common.out);
        if (!file) throw InputError("cannot write " + st.common.out);
    }
    std::ostream& sink = st.common.out.empty() ? out : file;
    if (st.kind == "transitions" || st.kind == "trajectories") {
        if (graph_path.empty()) throw ConfigError("--graph (or --run) is required");
        const PreferenceGraph graph = PreferenceGraph::load_file(graph_path);
        if (st.trajectory) {
            if (!graph.contains(*st.trajectory)) throw InputError("unknown trajectory " + std::to_string(*st.trajectory));
            if (st.kind == "transitions") {
                export_transitions(graph.trajectory(*st.trajectory), sink);
            } else {
                sink << to_json(graph.trajectory(*st.trajectory)).dump() << '\n';
            }
        } else {
            for (const auto& traj : graph.trajectories()) {
                if (st.kind == "transitions") {
                    export_transitions(traj, sink);
                } else {
                    sink << to_json(traj).dump() << '\n';
                }
            }
        }
    } else if (st.kind == "tree" || st.kind == "tree-json") {
        if (tree_path.empty()) throw ConfigError("--tree (or --run) is required");
        const RewardTree tree = load_tree(tree_path);
        if (st.kind == "tree") {
            sink << tree.render_text();
        } else {
            sink << tree.to_json().dump(2) << '\n';
        }
    } else if (st.kind == "preferences") {
        if (graph_path.empty()) throw ConfigError("--graph (or --run) is required");
        const PreferenceGraph graph = PreferenceGraph::load_file(graph_path);
        sink << "i\tj\tsource\ttimestamp\n";
        for (const auto& e : graph.edges()) {
            sink << e.i << '\t' << e.j << '\t' << label_source_name(e.source) << '\t' << e.timestamp << '\n';
        }
    } else {
        throw ConfigError("--kind must be transitions, trajectories, tree, tree-json or preferences");
    }
    return kExitOk;
}

int cmd_serve(const CliState& st, std::ostream& out) {
    ExperimentConfig cfg = build_config(st.common);
    cfg.evaluator = EvaluatorKind::HumanQueue;
    std::filesystem::path data = st.data_dir;
    if (data.empty()) data = output_dir(st.common, "serve-" + std::string(task_name(cfg.task)));
    ElicitationSession session(cfg, data);
    ElicitServer server(session, st.static_dir);
    const int port = server.bind(st.host, st.port);
    out << "listening on http://" << st.host << ":" << port << " (data in " << data.string() << ")" << std::endl;
    server.listen();
    return kExitOk;
}

std::unique_ptr<CLI::App> make_app(CliState& st) {
    auto app = std::make_unique<CLI::App>("Preference-based reward tree learning for fast-jet set-piece tasks", "jetpref");
    app->require_subcommand(1);
    app->footer(config_help_text());

    auto* pre = app->add_subcommand("pretrain-dynamics", "collect random-policy transitions and train the dynamics ensemble");
    add_common(*pre, st.common);

    auto* run = app->add_subcommand("run", "online reward learning with the synthetic oracle");
    add_common(*run, st.common);
    run->add_flag("--evaluate", st.evaluate, "also compute ORR and correlations (eval.json)");
    run->add_flag("--quiet", st.quiet, "no per-episode progress");

    auto* sweep = app->add_subcommand("sweep", "sensitivity sweep over one axis");
    add_common(*sweep, st.common);
    sweep->add_option("--axis", st.axis, "k_max | n_max | error_rate | myopia");
    sweep->add_option("--values", st.values, "comma-separated axis values")->delimiter(',')->required();
    sweep->add_option("--repeats", st.repeats, "repeats per value (seeds seed .. seed+repeats-1)");
    sweep->add_option("--jobs", st.jobs, "parallel workers");

    auto* eval = app->add_subcommand("eval", "ORR, reward correlation and Kendall tau of a checkpoint");
    add_common(*eval, st.common);
    eval->add_option("--checkpoint", st.checkpoint, "tree or reward-network checkpoint");
    eval->add_option("--run", st.run_dir, "run directory (config.txt and model.json)");

    auto* explain = app->add_subcommand("explain", "render a tree's rules or a trajectory's leaf-by-leaf explanation");
    explain->add_option("--tree", st.checkpoint, "tree checkpoint");
    explain->add_option("--graph", st.graph_file, "graph file holding the trajectory");
    explain->add_option("--run", st.run_dir, "run directory (model.json and graph.jsonl)");
    explain->add_option("--trajectory", st.trajectory, "trajectory id");
    explain->add_flag("--json", st.json, "JSON instead of text");

    auto* exp = app->add_subcommand("export", "export trajectories, trees or preferences");
    exp->add_option("--kind", st.kind, "transitions | trajectories | tree | tree-json | preferences");
    exp->add_option("--graph", st.graph_file, "graph file");
    exp->add_option("--tree", st.checkpoint, "tree checkpoint");
    exp->add_option("--run", st.run_dir, "run directory");
    exp->add_option("--trajectory", st.trajectory, "only this trajectory");
    exp->add_option("--out", st.common.out, "output file (default stdout)");

    auto* serve = app->add_subcommand("serve", "start the elicitation service for human labels");
    add_common(*serve, st.common, false);
    serve->add_option("--data", st.data_dir, "session directory (resumed when it holds a session)");
    serve->add_option("--host", st.host, "bind address");
    serve->add_option("--port", st.port, "port (0 picks a free one)");
    serve->add_option("--static", st.static_dir, "directory of UI assets served at /");
    return app;
}

}  // namespace

std::string cli_help_text() {
    CliState st;
    return make_app(st)->help();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CliState st;
    auto app = make_app(st);
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app->parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app->exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    try {
        const auto* sub = app->get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "pretrain-dynamics") return cmd_pretrain(st, out);
        if (name == "run") return cmd_run(st, out, err);
        if (name == "sweep") return cmd_sweep(st, out);
        if (name == "eval") return cmd_eval(st, out);
        if (name == "explain") return cmd_explain(st, out);
        if (name == "export") return cmd_export(st, out);
        if (name == "serve") return cmd_serve(st, out);
        err << "unknown subcommand " << name << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace jetpref
