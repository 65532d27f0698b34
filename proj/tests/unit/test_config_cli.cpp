#include "jetpref/cli.hpp"
#include "jetpref/config.hpp"
#include "jetpref/error.hpp"
#include "jetpref/rewardtree.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace jetpref;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Exit status of the installed binary.
int process_exit(const std::string& args) {
    const std::string cmd = std::string(JETPREF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::vector<std::string> kSmall{"--set", "n_max=4",           "--set", "planner.horizon=3",
                                      "--set", "planner.iterations=2", "--set", "planner.candidates=6",
                                      "--set", "planner.elites=2",   "--set", "eval.episodes=2",
                                      "--set", "eval.dataset_size=4"};

std::vector<std::string> with_small(std::vector<std::string> args) {
    args.insert(args.end(), kSmall.begin(), kSmall.end());
    return args;
}

RewardTree toy_tree() {
    TreeNode split;
    split.feature = static_cast<int>(feature_index("alt"));
    split.threshold = 50.0;
    split.left = 1;
    split.right = 2;
    TreeNode low, high;
    low.reward = -1.0;
    high.reward = 0.0;
    return RewardTree::from_nodes({split, low, high});
}

}  // namespace

TEST_CASE("config text parsing") {
    const ExperimentConfig cfg = parse_config_text(
        "# comment\n"
        "task = chase\n"
        "k_max = 40   # trailing comment\n"
        "[planner]\n"
        "horizon = 4\n"
        "[oracle]\n"
        "recency_discount = 0.9\n");
    CHECK(cfg.task == Task::Chase);
    CHECK(cfg.k_max == 40);
    CHECK(cfg.planner.horizon == 4);
    CHECK(cfg.oracle.recency_discount == 0.9);
    CHECK(cfg.n_max == 200);

    CHECK_THROWS_AS(parse_config_text("bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("k_max = ten\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("k_max = 3.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("task = orbit\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ConfigError);
    try {
        parse_config_text("[planner]\nhorizn = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("planner.horizn") != std::string::npos);
    }
}

TEST_CASE("every key has a default and the snapshot round-trips") {
    ExperimentConfig cfg;
    cfg.task = Task::Land;
    cfg.seed = 77;
    cfg.planner.discount = 0.95;
    cfg.eval.action_noise = 0.125;
    cfg.dynamics_checkpoint = "/tmp/ens.json";
    const std::string text = config_to_text(cfg);
    const ExperimentConfig back = parse_config_text(text);
    CHECK(config_to_text(back) == text);
    for (const auto& key : config_keys()) {
        CHECK(get_config_value(back, key.key) == get_config_value(cfg, key.key));
        if (key.type != "path") CHECK_FALSE(get_config_value(ExperimentConfig{}, key.key).empty());
    }
    CHECK_THROWS_AS(get_config_value(cfg, "nope"), ConfigError);
}

TEST_CASE("set_config_value is type checked") {
    ExperimentConfig cfg;
    set_config_value(cfg, "induction.alpha", "0.01");
    CHECK(cfg.induction.alpha == 0.01);
    set_config_value(cfg, "eval.seed", "18446744073709551615");
    CHECK(cfg.eval.seed == 18446744073709551615ULL);
    CHECK_THROWS_AS(set_config_value(cfg, "eval.seed", "-1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(cfg, "induction.alpha", "0.01x"), ConfigError);
    CHECK_THROWS_AS(set_config_value(cfg, "model", "forest"), ConfigError);
}

TEST_CASE("help output matches the golden file and lists every key") {
    const std::string golden = slurp(fs::path(JETPREF_GOLDEN_DIR) / "cli_help.txt");
    const CliResult r = cli({"--help"});
    CHECK(r.code == kExitOk);
    CHECK(r.out == golden);
    CHECK(cli_help_text() == golden);
    for (const auto& key : config_keys()) CHECK_MESSAGE(golden.find(key.key + " <") != std::string::npos, key.key);
}

TEST_CASE("exit codes") {
    CHECK(cli({"fly"}).code == kExitConfig);
    CHECK(cli({}).code == kExitConfig);
    const CliResult bad_key = cli({"run", "--set", "planner.horizn=3"});
    CHECK(bad_key.code == kExitConfig);
    CHECK(bad_key.err.find("planner.horizn") != std::string::npos);
    CHECK(cli({"run", "--set", "k_max=-2"}).code == kExitConfig);
    CHECK(cli({"run", "--set", "noequals"}).code == kExitConfig);
    CHECK(cli({"run", "--config", "/nonexistent/cfg.txt"}).code != kExitOk);
    CHECK(cli({"explain", "--tree", "/nonexistent/tree.json"}).code == kExitRuntime);

    CHECK(process_exit("fly") == kExitConfig);
    CHECK(process_exit("--help") == kExitOk);
    CHECK(process_exit("explain --tree /nonexistent/tree.json") == kExitRuntime);
}

TEST_CASE("run twice with the same seed writes byte-identical metrics") {
    const fs::path a = test::temp_dir("cli_run_a"), b = test::temp_dir("cli_run_b");
    const auto args_for = [](const fs::path& dir) {
        return with_small({"run", "--task", "follow", "--model", "tree-0-1", "--seed", "7", "--quiet", "--out", dir.string()});
    };
    const CliResult ra = cli(args_for(a));
    REQUIRE_MESSAGE(ra.code == kExitOk, ra.err);
    REQUIRE(cli(args_for(b)).code == kExitOk);
    CHECK(slurp(a / "metrics.tsv") == slurp(b / "metrics.tsv"));
    CHECK(slurp(a / "graph.jsonl") == slurp(b / "graph.jsonl"));
    CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
    const ExperimentConfig snap = load_config_file(a / "config.txt");
    CHECK(snap.seed == 7);
    CHECK(snap.n_max == 4);
    CHECK(snap.planner.horizon == 3);
}

TEST_CASE("config files and overrides") {
    const fs::path dir = test::temp_dir("cli_config");
    {
        std::ofstream f(dir / "cfg.txt");
        f << "task = land\nseed = 3\nn_max = 2\n[planner]\nhorizon = 2\niterations = 1\ncandidates = 4\nelites = 2\n";
    }
    const CliResult r = cli({"run", "--config", (dir / "cfg.txt").string(), "--set", "seed=5", "--quiet", "--evaluate",
                             "--set", "eval.episodes=2", "--set", "eval.dataset_size=3", "--out",
                             (dir / "run").string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const ExperimentConfig snap = load_config_file(dir / "run" / "config.txt");
    CHECK(snap.task == Task::Land);
    CHECK(snap.seed == 5);
    CHECK(snap.planner.horizon == 2);
    const Json ev = Json::parse(slurp(dir / "run" / "eval.json"));
    CHECK(ev.contains("orr"));
    CHECK(ev.at("returns").size() == 2);
    CHECK(fs::exists(dir / "run" / "run.json"));
}

TEST_CASE("explain renders the tree checkpoint") {
    const fs::path dir = test::temp_dir("cli_explain");
    const RewardTree tree = toy_tree();
    tree.save_file(dir / "tree.json");
    const CliResult r = cli({"explain", "--tree", (dir / "tree.json").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out == tree.render_text());
    CHECK(r.out.find("alt < 50") != std::string::npos);
    CHECK(r.out.find("alt >= 50") != std::string::npos);
    const CliResult j = cli({"explain", "--tree", (dir / "tree.json").string(), "--json"});
    CHECK(RewardTree::from_json(Json::parse(j.out)) == tree);

    PreferenceGraph g(Task::Follow);
    const std::size_t alt = feature_index("alt");
    g.add_trajectory(test::scalar_trajectory({10.0, 20.0, 70.0, 80.0, 30.0}, alt));
    g.add_trajectory(test::scalar_trajectory({60.0}, alt));
    g.add_preference(0, 1);
    g.save_file(dir / "g.jsonl");
    const CliResult e = cli({"explain", "--tree", (dir / "tree.json").string(), "--graph", (dir / "g.jsonl").string(),
                             "--trajectory", "0"});
    REQUIRE(e.code == kExitOk);
    const Explanation want = explain_trajectory(tree, g.trajectory(0));
    CHECK(e.out == want.render_text());
    CHECK(want.segments.size() == 3);
    CHECK(want.total() == doctest::Approx(-3.0));
    CHECK(cli({"explain", "--tree", (dir / "tree.json").string(), "--graph", (dir / "g.jsonl").string(),
               "--trajectory", "9"})
              .code == kExitRuntime);

    const CliResult p = cli({"export", "--kind", "preferences", "--graph", (dir / "g.jsonl").string()});
    CHECK(p.out == "i\tj\tsource\ttimestamp\n0\t1\toracle\t0\n");
    const CliResult t = cli({"export", "--kind", "tree", "--tree", (dir / "tree.json").string()});
    CHECK(t.out == tree.render_text());
    const CliResult tr = cli({"export", "--kind", "transitions", "--graph", (dir / "g.jsonl").string(),
                              "--trajectory", "1"});
    CHECK(tr.code == kExitOk);
    CHECK(std::count(tr.out.begin(), tr.out.end(), '\n') >= 1);
    CHECK(cli({"export", "--kind", "pictures", "--graph", (dir / "g.jsonl").string()}).code == kExitConfig);
}

TEST_CASE("eval on a checkpoint reports orr against the baselines") {
    const fs::path dir = test::temp_dir("cli_eval");
    toy_tree().save_file(dir / "tree.json");
    const CliResult r = cli(with_small({"eval", "--checkpoint", (dir / "tree.json").string(), "--task", "chase"}));
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const Json j = Json::parse(r.out);
    const double o = j.at("oracle_mean"), rnd = j.at("random_mean"), m = j.at("model_mean");
    CHECK(j.at("orr").get<double>() == doctest::Approx((o - m) / (o - rnd)));
}
