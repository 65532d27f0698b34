#include "jetpref/error.hpp"
#include "jetpref/experiment.hpp"
#include "jetpref/metrics.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace jetpref;
namespace fs = std::filesystem;

namespace {

ExperimentConfig fast_config(Task task = Task::Follow, int n_max = 6) {
    ExperimentConfig cfg;
    cfg.task = task;
    cfg.n_max = n_max;
    cfg.planner.horizon = 3;
    cfg.planner.iterations = 2;
    cfg.planner.candidates = 6;
    cfg.planner.elites = 2;
    cfg.eval.episodes = 3;
    cfg.eval.dataset_size = 8;
    cfg.reward_nn.hidden_units = 16;
    cfg.reward_nn.batches_per_update = 5;
    cfg.reward_nn_norm_rollouts = 5;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

// Tau-b from pair counts.
std::optional<double> ref_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
    double conc = 0, disc = 0, ta = 0, tb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double da = a[i] - a[j], db = b[i] - b[j];
            if (da == 0 && db == 0) continue;
            if (da == 0) {
                ++ta;
            } else if (db == 0) {
                ++tb;
            } else if ((da > 0) == (db > 0)) {
                ++conc;
            } else {
                ++disc;
            }
        }
    }
    const double denom = std::sqrt((conc + disc + ta) * (conc + disc + tb));
    if (denom == 0.0) return std::nullopt;
    return (conc - disc) / denom;
}

class NegatedOracle final : public RewardModel {
public:
    explicit NegatedOracle(Task t) : task_(t) {}
    double reward(const FeatureVector& x) const override { return -oracle_reward(task_, x); }
    std::string kind() const override { return "negated"; }
private:
    Task task_;
};

class Constant final : public RewardModel {
public:
    double reward(const FeatureVector&) const override { return 1.5; }
    std::string kind() const override { return "constant"; }
};

}  // namespace

TEST_CASE("experiment config validation") {
    ExperimentConfig cfg;
    cfg.validate();
    cfg.n_max = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.k_max = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.oracle_error_rate = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.planner.elites = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_model_type("tree-variance") == ModelType::TreeVariance);
    CHECK_THROWS_AS(parse_model_type("forest"), ConfigError);
    CHECK(parse_evaluator("human-queue") == EvaluatorKind::HumanQueue);
    CHECK(parse_sweep_axis("error_rate") == SweepAxis::ErrorRate);
}

TEST_CASE("three episodes with batch five give three trajectories and at most three edges") {
    ExperimentConfig cfg = fast_config(Task::Follow, 3);
    const RunArtifacts run = run_online(cfg);
    CHECK(run.graph.num_trajectories() == 3);
    CHECK(run.graph.num_edges() <= 3);
    CHECK(run.graph.num_edges() == 3);
    REQUIRE(run.records.size() == 3);
    CHECK(run.records[0].edges == 0);
    CHECK(run.records[1].edges == 1);
    CHECK(run.records[2].edges == 3);
    CHECK(run.records[0].leaves == 0);
    CHECK(run.records[2].leaves >= 1);
}

TEST_CASE("a zero preference budget never trains the model") {
    ExperimentConfig cfg = fast_config(Task::Chase, 4);
    cfg.k_max = 0;
    const RunArtifacts run = run_online(cfg);
    CHECK(run.graph.num_edges() == 0);
    CHECK(run.records.size() == 4);
    CHECK_FALSE(run.model->trained());
    CHECK(run.model->reward_model()->kind() == "zero");
    for (const auto& r : run.records) CHECK(r.leaves == 0);
}

TEST_CASE("budget accounting is exact") {
    ExperimentConfig cfg = fast_config(Task::Follow, 6);
    cfg.k_max = 7;
    const RunArtifacts run = run_online(cfg);
    CHECK(run.graph.num_trajectories() == 6);
    CHECK(run.graph.num_edges() == 7);
    for (const auto& r : run.records) CHECK(r.edges <= 7);

    cfg.k_batch = 0;
    const RunArtifacts none = run_online(cfg);
    CHECK(none.graph.num_edges() == 0);
    CHECK(none.graph.num_trajectories() == 6);
}

TEST_CASE("seeded runs write byte-identical artifacts") {
    ExperimentConfig cfg = fast_config(Task::Land, 5);
    cfg.checkpoint_stride = 2;
    const fs::path a = test::temp_dir("loop_a"), b = test::temp_dir("loop_b");
    write_artifacts(run_online(cfg, nullptr, a), a);
    write_artifacts(run_online(cfg, nullptr, b), b);
    const auto ca = dir_contents(a), cb = dir_contents(b);
    CHECK(ca.size() >= 6);
    CHECK(ca == cb);
    CHECK(ca.count("metrics.tsv"));
    CHECK(ca.count("graph.jsonl"));
    CHECK(ca.count("config.txt"));
    CHECK(ca.count("model.json"));
    CHECK(ca.count("checkpoints/episode_0002.json"));
    CHECK(ca.count("checkpoints/episode_0005.json"));

    cfg.seed = 1;
    const fs::path c = test::temp_dir("loop_c");
    write_artifacts(run_online(cfg, nullptr, c), c);
    CHECK(dir_contents(c).at("graph.jsonl") != ca.at("graph.jsonl"));
}

TEST_CASE("metrics are recomputable from the persisted artifacts") {
    ExperimentConfig cfg = fast_config(Task::Follow, 6);
    cfg.checkpoint_stride = 2;
    const fs::path dir = test::temp_dir("loop_replay");
    write_artifacts(run_online(cfg, nullptr, dir), dir);
    const PreferenceGraph graph = PreferenceGraph::load_file(dir / "graph.jsonl");
    const auto rows = read_tsv(dir / "metrics.tsv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] == std::vector<std::string>{"episode", "trajectory_id", "online_return", "edges", "leaves",
                                              "loss_count", "loss_fraction", "checkpoint"});
    const OracleConfig unbiased{Task::Follow, 0.0, 1.0, 0};
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const int id = std::stoi(row[1]);
        const int edges = std::stoi(row[3]);
        CHECK(std::stod(row[2]) == oracle_return(graph.trajectory(id), unbiased));
        if (row[7] == "-") continue;
        // The checkpointed model scored on the graph as it stood at that episode.
        PreferenceGraph sub(Task::Follow);
        for (int k = 0; k <= id; ++k) sub.add_trajectory(graph.trajectory(k));
        for (const auto& e : graph.edges()) {
            if (e.timestamp <= edges) sub.add_preference(e.i, e.j, e.source, e.timestamp);
        }
        CHECK(sub.num_edges() == edges);
        const RewardModelPtr model = load_reward_model(dir / row[7]);
        const auto* tree = dynamic_cast<const TreeReward*>(model.get());
        REQUIRE(tree != nullptr);
        CHECK(tree->tree().num_leaves() == std::max(1, std::stoi(row[4])));
        if (edges == 0) continue;
        const auto pred = predicted_returns(tree->tree(), sub);
        const ReturnEstimates est = estimate_returns(sub, cfg.induction);
        CHECK(loss_0_1(sub, pred, tie_tolerance(est.g)).count == std::stoi(row[5]));
        // Re-inducing from scratch reproduces the checkpoint.
        CHECK(induce(sub, cfg.induction).tree == tree->tree());
    }
}

TEST_CASE("online loop state machine") {
    ExperimentConfig cfg = fast_config(Task::Follow, 2);
    OnlineLoop loop(cfg);
    CHECK_THROWS_AS(loop.complete_episode({}, LabelSource::Oracle), StateError);
    CHECK(loop.begin_episode().empty());
    CHECK(loop.awaiting_labels());
    CHECK_THROWS_AS(loop.begin_episode(), StateError);
    loop.complete_episode({}, LabelSource::Oracle);
    const auto pending = loop.begin_episode();
    REQUIRE(pending.size() == 1);
    const std::vector<std::pair<int, int>> wrong{{0, 0}};
    CHECK_THROWS_AS(loop.complete_episode(wrong, LabelSource::Human), InputError);
    const std::vector<std::pair<int, int>> flipped{{pending[0].j, pending[0].i}};
    loop.complete_episode(flipped, LabelSource::Human);
    CHECK(loop.graph().has_edge(pending[0].j, pending[0].i));
    CHECK(loop.graph().edges()[0].source == LabelSource::Human);
    CHECK(loop.finished());
    CHECK_THROWS_AS(loop.begin_episode(), StateError);

    cfg.evaluator = EvaluatorKind::HumanQueue;
    OnlineLoop human(cfg);
    CHECK_THROWS_AS(human.run(), StateError);
}

TEST_CASE("restoring a loop mid-run reproduces the uninterrupted run") {
    for (ModelType m : {ModelType::TreeZeroOne, ModelType::RewardNN}) {
        ExperimentConfig cfg = fast_config(Task::Chase, 5);
        cfg.model = m;
        INFO(model_type_name(m));
        const RunArtifacts full = run_online(cfg);

        OnlineLoop first(cfg);
        for (int e = 0; e < 2; ++e) {
            first.begin_episode();
            first.complete_episode(first.oracle_labels(), LabelSource::Oracle);
        }
        first.begin_episode();
        const auto pending = std::vector<PendingLabel>(first.pending().begin(), first.pending().end());
        const Json net = first.model().to_json();

        OnlineLoop resumed(cfg);
        resumed.restore(first.graph(), first.records(), pending, m == ModelType::RewardNN ? &net : nullptr);
        CHECK(resumed.awaiting_labels());
        CHECK(resumed.episode() == 3);
        resumed.run();
        REQUIRE(resumed.records().size() == full.records.size());
        for (std::size_t k = 0; k < full.records.size(); ++k) {
            CHECK(resumed.records()[k].online_return == full.records[k].online_return);
            CHECK(resumed.records()[k].edges == full.records[k].edges);
            CHECK(resumed.records()[k].loss_count == full.records[k].loss_count);
        }
        std::ostringstream a, b;
        resumed.graph().save(a);
        full.graph.save(b);
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("restore rejects inconsistent state") {
    ExperimentConfig cfg = fast_config(Task::Follow, 3);
    OnlineLoop loop(cfg);
    PreferenceGraph wrong_task(Task::Land);
    CHECK_THROWS_AS(loop.restore(wrong_task, {}, {}), InputError);
    PreferenceGraph g(Task::Follow);
    g.add_trajectory(test::scalar_trajectory({1.0}));
    g.add_trajectory(test::scalar_trajectory({2.0}));
    CHECK_THROWS_AS(loop.restore(g, {}, {}), InputError);
}

TEST_CASE("orr examples and invariance") {
    CHECK(orr(90.0, 100.0, 0.0) == doctest::Approx(0.1));
    CHECK(orr(100.0, 100.0, 0.0) == 0.0);
    CHECK(orr(0.0, 100.0, 0.0) == 1.0);
    CHECK_THROWS_AS(orr(1.0, 5.0, 5.0), EvaluationError);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-100.0, 100.0), s(0.1, 10.0);
    for (int k = 0; k < 1000; ++k) {
        const double m = u(rng), o = u(rng), r = u(rng), a = s(rng), b = u(rng);
        if (std::abs(o - r) < 1e-3) continue;
        CHECK(orr(a * m + b, a * o + b, a * r + b) == doctest::Approx(orr(m, o, r)).epsilon(1e-9));
    }
}

TEST_CASE("kendall tau examples") {
    const std::vector<double> a{1, 2, 3}, b{1, 3, 2}, rev{3, 2, 1}, tied{4, 4, 4};
    CHECK(*kendall_tau(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(*kendall_tau(a, a) == doctest::Approx(1.0));
    CHECK(*kendall_tau(a, rev) == doctest::Approx(-1.0));
    CHECK_FALSE(kendall_tau(a, tied).has_value());
    CHECK_THROWS_AS(kendall_tau(std::vector<double>{1.0}, std::vector<double>{1.0}), InputError);
    CHECK_THROWS_AS(kendall_tau(a, std::vector<double>{1.0, 2.0}), InputError);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> v(0, 4);
    for (int k = 0; k < 300; ++k) {
        std::vector<double> x(12), y(12);
        for (auto& e : x) e = v(rng);
        for (auto& e : y) e = v(rng);
        const auto want = ref_tau_b(x, y);
        const auto got = kendall_tau(x, y);
        REQUIRE(want.has_value() == got.has_value());
        if (want) CHECK(*got == doctest::Approx(*want).epsilon(1e-12));
    }
}

TEST_CASE("summary statistics") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(quantile({0.0, 10.0}, 0.25) == doctest::Approx(2.5));
    CHECK(iqr({1.0, 2.0, 3.0, 4.0, 5.0}) == doctest::Approx(2.0));
    const std::vector<double> p{1, 2, 3, 4}, q{2, 4, 6, 8}, c{1, 1, 1, 1};
    CHECK(*pearson(p, q) == doctest::Approx(1.0));
    CHECK_FALSE(pearson(p, c).has_value());
}

TEST_CASE("evaluation datasets") {
    const ExperimentConfig cfg = fast_config();
    const SimulatorDynamics dyn;
    CHECK(build_eval_dataset(Task::Follow, cfg.planner, 0, 0.2, 1, dyn).empty());
    const auto a = build_eval_dataset(Task::Follow, cfg.planner, 3, 0.2, 11, dyn);
    const auto b = build_eval_dataset(Task::Follow, cfg.planner, 3, 0.2, 11, dyn);
    REQUIRE(a.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(a[k].provenance == Provenance::OracleEval);
        REQUIRE(a[k].length() == b[k].length());
        for (int t = 0; t < a[k].length(); ++t) CHECK(a[k].transitions[t].x == b[k].transitions[t].x);
    }
    // Noise probability one: every action is uniform random, so nothing planner-driven remains.
    PlannerConfig other = cfg.planner;
    other.iterations = 3;
    const auto r1 = build_eval_dataset(Task::Chase, cfg.planner, 2, 1.0, 5, dyn);
    const auto r2 = build_eval_dataset(Task::Chase, other, 2, 1.0, 5, dyn);
    for (std::size_t k = 0; k < 2; ++k) {
        for (int t = 0; t < r1[k].length(); ++t) {
            CHECK(r1[k].transitions[t].action == r2[k].transitions[t].action);
            CHECK(r1[k].transitions[t].action.clamped() == r1[k].transitions[t].action);
        }
    }
    CHECK_THROWS_AS(build_eval_dataset(Task::Follow, cfg.planner, 1, 1.5, 1, dyn), InputError);
}

TEST_CASE("reward correlation and return ranking on the evaluation dataset") {
    const ExperimentConfig cfg = fast_config(Task::Land);
    const auto ds = build_eval_dataset(Task::Land, cfg.planner, 6, 0.2, 3, SimulatorDynamics{});
    const OracleReward oracle(Task::Land);
    CHECK(*reward_correlation(oracle, ds, Task::Land) == doctest::Approx(1.0));
    CHECK(*reward_correlation(NegatedOracle(Task::Land), ds, Task::Land) == doctest::Approx(-1.0));
    CHECK_FALSE(reward_correlation(Constant(), ds, Task::Land).has_value());
    CHECK(*return_kendall_tau(oracle, ds, Task::Land) == doctest::Approx(1.0));
    const auto pairs = return_pairs(ds, OracleConfig{Task::Land, 0.0, 1.0, 0});
    CHECK(pairs.size() == 15);
}

TEST_CASE("mean return error shrinks with more episodes") {
    ExperimentConfig cfg = fast_config(Task::Chase);
    auto spread = [&](int n) {
        std::vector<double> means;
        for (std::uint64_t s = 0; s < 24; ++s) {
            cfg.eval.seed = 1000 + s;
            means.push_back(evaluate_random_policy(cfg, n).mean);
        }
        const double m = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
        double v = 0.0;
        for (double x : means) v += (x - m) * (x - m);
        return v / (means.size() - 1);
    };
    const double ratio = spread(4) / spread(16);
    MESSAGE("variance ratio " << ratio);
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
}

TEST_CASE("evaluation of a run yields finite metrics") {
    const ExperimentConfig cfg = fast_config(Task::Chase, 4);
    const SimulatorDynamics dyn;
    const EvalContext ctx = make_eval_context(cfg, dyn);
    CHECK(ctx.dataset.size() == 8);
    CHECK(ctx.oracle_mean > ctx.random_mean);
    const RunEvaluation oracle_ev = evaluate_run(OracleReward(Task::Chase), cfg, ctx, dyn);
    CHECK(oracle_ev.orr == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(*oracle_ev.kendall == doctest::Approx(1.0));
    const RunArtifacts run = run_online(cfg);
    const RunEvaluation ev = evaluate_run(*run.model->reward_model(), cfg, ctx, dyn);
    CHECK(std::isfinite(ev.orr));
    CHECK(ev.returns.size() == 3);
    CHECK(ev.altitude_violation_fraction >= 0.0);
    CHECK(ev.altitude_violation_fraction <= 1.0);
}

TEST_CASE("all model types run through the loop") {
    for (ModelType m : {ModelType::TreeVariance, ModelType::RewardNN}) {
        ExperimentConfig cfg = fast_config(Task::Follow, 4);
        cfg.model = m;
        const RunArtifacts run = run_online(cfg);
        CHECK(run.model->trained());
        CHECK(run.graph.num_edges() == 6);
        if (m == ModelType::RewardNN) {
            CHECK(run.model->network() != nullptr);
            CHECK(run.model->network()->updates() == 3);
            CHECK(run.records.back().leaves == 0);
        } else {
            CHECK(run.model->tree() != nullptr);
        }
    }
}

TEST_CASE("sensitivity sweeps") {
    ExperimentConfig base = fast_config(Task::Follow, 3);
    const SweepResult sweep = sensitivity_sweep(base, SweepAxis::KMax, {1.0, 1000.0}, 2, 2);
    REQUIRE(sweep.rows.size() == 4);
    CHECK(sweep.summary.size() == 2);
    CHECK(sweep.rows[0].value == 1.0);
    CHECK(sweep.rows[1].repeat == 1);

    // A single value equal to the base reproduces the base run.
    const SimulatorDynamics dyn;
    const EvalContext ctx = make_eval_context(base, dyn);
    const RunArtifacts run = run_online(base);
    const double base_orr = evaluate_run(*run.model->reward_model(), base, ctx, dyn).orr;
    CHECK(sweep.rows[2].orr == base_orr);

    // Thread count does not change results.
    const SweepResult serial = sensitivity_sweep(base, SweepAxis::KMax, {1.0, 1000.0}, 2, 1);
    for (std::size_t k = 0; k < 4; ++k) CHECK(serial.rows[k].orr == sweep.rows[k].orr);

    std::ostringstream rows, summary;
    write_sweep_tsv(sweep, SweepAxis::KMax, rows);
    write_sweep_summary_tsv(sweep, SweepAxis::KMax, summary);
    const std::string rows_text = rows.str(), summary_text = summary.str();
    CHECK(std::count(rows_text.begin(), rows_text.end(), '\n') == 5);
    CHECK(std::count(summary_text.begin(), summary_text.end(), '\n') == 3);

    CHECK_THROWS_AS(sensitivity_sweep(base, SweepAxis::ErrorRate, {0.6}, 1), ConfigError);
    CHECK_THROWS_AS(apply_sweep_value(base, SweepAxis::NMax, 2.5), ConfigError);
}

TEST_CASE("a zero error rate labels exactly like the deterministic oracle") {
    ExperimentConfig base = fast_config(Task::Follow, 4);
    base.oracle.beta = 3.0;
    const ExperimentConfig zero = apply_sweep_value(base, SweepAxis::ErrorRate, 0.0);
    ExperimentConfig det = base;
    det.oracle.beta = 0.0;
    const RunArtifacts a = run_online(zero), b = run_online(det);
    REQUIRE(a.graph.num_edges() == b.graph.num_edges());
    for (int k = 0; k < a.graph.num_edges(); ++k) CHECK(a.graph.edges()[k] == b.graph.edges()[k]);

    const ExperimentConfig noisy = apply_sweep_value(base, SweepAxis::ErrorRate, 0.2);
    CHECK(noisy.oracle_error_rate == 0.2);
    const auto ds = build_eval_dataset(Task::Follow, base.planner, base.eval.dataset_size, base.eval.action_noise,
                                       base.eval.seed, SimulatorDynamics{});
    const double beta = resolve_oracle_beta(noisy, ds);
    CHECK(beta > 0.0);
    CHECK(std::abs(expected_error_rate(beta, return_pairs(ds, OracleConfig{Task::Follow, 0.0, 1.0, 0})) - 0.2) < 1e-3);
}
