#include "jetpref/error.hpp"
#include "jetpref/experiment.hpp"
#include "jetpref/oracles.hpp"
#include "jetpref/planner.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace jetpref;

namespace {

PlannerConfig small_planner() {
    PlannerConfig cfg;
    cfg.horizon = 4;
    cfg.iterations = 4;
    cfg.candidates = 10;
    cfg.elites = 3;
    return cfg;
}

class ConstantReward final : public RewardModel {
public:
    explicit ConstantReward(double v) : v_(v) {}
    double reward(const FeatureVector&) const override { return v_; }
    std::string kind() const override { return "constant"; }
private:
    double v_;
};

bool within_bounds(const Action& a) {
    return a.pitch >= -1.0 && a.pitch <= 1.0 && a.roll >= -1.0 && a.roll <= 1.0 && a.yaw >= -1.0 &&
           a.yaw <= 1.0 && a.thrust >= 0.0 && a.thrust <= 1.0;
}

// Scores a 1-D toy: s' = s + a from s0 = 3, reward -|s'|.
CemScoreFn toy_score() {
    return [](std::span<const Eigen::MatrixXd> cands, std::span<double> out) {
        for (std::size_t k = 0; k < cands.size(); ++k) out[k] = -std::abs(3.0 + cands[k](0, 0));
    };
}

}  // namespace

TEST_CASE("planner config validation") {
    PlannerConfig cfg;
    cfg.validate();
    cfg.elites = 30;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = PlannerConfig{};
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = PlannerConfig{};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.learning_rate = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_dynamics_mode("learned-ensemble") == DynamicsMode::LearnedEnsemble);
    CHECK(parse_dynamics_mode(dynamics_mode_name(DynamicsMode::TrueSimulator)) == DynamicsMode::TrueSimulator);
    CHECK_THROWS_AS(parse_dynamics_mode("magic"), ConfigError);
}

TEST_CASE("CEM solves the one-dimensional toy") {
    PlannerConfig cfg;
    cfg.horizon = 1;
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, -5.0), hi = Eigen::VectorXd::Constant(1, 5.0);
    const Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(1, 1);
    const Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(1, 1, 2.5);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const CemResult r = cem_optimize(toy_score(), lo, hi, mean, sd, cfg, seed);
        CHECK(std::abs(r.mean(0, 0) + 3.0) < 0.2);
        CHECK(r.elite_mean_scores.size() == 10);
    }
}

TEST_CASE("CEM elite means are non-decreasing across iterations") {
    PlannerConfig cfg;
    cfg.horizon = 3;
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -2.0), hi = Eigen::VectorXd::Constant(2, 2.0);
    const Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 3);
    const Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(2, 3, 1.0);
    Eigen::MatrixXd target(2, 3);
    target << 0.7, -1.2, 0.3, 1.5, 0.0, -0.4;
    const CemScoreFn score = [&](std::span<const Eigen::MatrixXd> cands, std::span<double> out) {
        for (std::size_t k = 0; k < cands.size(); ++k) out[k] = -(cands[k] - target).squaredNorm();
    };
    int monotone = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const CemResult r = cem_optimize(score, lo, hi, mean, sd, cfg, seed);
        bool ok = true;
        for (std::size_t k = 1; k < r.elite_mean_scores.size(); ++k) ok &= r.elite_mean_scores[k] >= r.elite_mean_scores[k - 1];
        monotone += ok;
        for (Eigen::Index k = 0; k < r.mean.size(); ++k) {
            CHECK(r.mean.data()[k] >= -2.0);
            CHECK(r.mean.data()[k] <= 2.0);
        }
    }
    CHECK(monotone >= 95);
}

TEST_CASE("CEM with near-zero spread picks the better of two candidates") {
    PlannerConfig cfg;
    cfg.horizon = 1;
    cfg.iterations = 1;
    cfg.candidates = 2;
    cfg.elites = 1;
    cfg.learning_rate = 1.0;
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, -1.0), hi = Eigen::VectorXd::Constant(1, 1.0);
    const Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(1, 1, 1e-9);
    const CemScoreFn score = [](std::span<const Eigen::MatrixXd> cands, std::span<double> out) {
        for (std::size_t k = 0; k < cands.size(); ++k) out[k] = cands[k](0, 0) > 0.0 ? 1.0 : -1.0;
    };
    // Both candidates sit at the mean, so the result stays there.
    for (double m : {-0.5, 0.5}) {
        const CemResult r = cem_optimize(score, lo, hi, Eigen::MatrixXd::Constant(1, 1, m), sd, cfg, 1);
        CHECK(r.mean(0, 0) == doctest::Approx(m).epsilon(1e-6));
    }
    // Exhaustive oracle over two explicit plans scored by the planner.
    const WorldState s = reset(Task::Follow, 3);
    const OracleReward reward(Task::Follow);
    const std::vector<std::vector<Action>> plans{{Action{0.0, 0.0, 1.0, 0.5}}, {Action{0.0, 0.0, -1.0, 0.5}}};
    const auto scores = score_sequences(s, plans, reward, SimulatorDynamics{}, 1.0);
    for (std::size_t k = 0; k < 2; ++k) {
        const WorldState n = step(s, plans[k][0]);
        CHECK(scores[k] == doctest::Approx(oracle_reward(Task::Follow, phi(s, plans[k][0], n))));
    }
}

TEST_CASE("sequence scores match a hand rollout") {
    const WorldState s = reset(Task::Chase, 4);
    std::vector<Action> seq;
    for (int t = 0; t < 6; ++t) seq.push_back(random_action(5, t));
    const OracleReward reward(Task::Chase);
    for (double gamma : {1.0, 0.9}) {
        double want = 0.0, w = 1.0;
        WorldState cur = s;
        for (const Action& a : seq) {
            const WorldState n = advance(cur, a);
            want += w * oracle_reward(Task::Chase, phi(cur, a, n));
            w *= gamma;
            cur = n;
        }
        const std::vector<std::vector<Action>> seqs{seq};
        CHECK(score_sequences(s, seqs, reward, SimulatorDynamics{}, gamma)[0] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("land scoring stops once EJ passes the threshold") {
    WorldState s = reset(Task::Land, 2);
    s.ej.position = Vec3(-30.0, 0.0, 5.0);
    const std::vector<std::vector<Action>> seqs{std::vector<Action>(5, Action{0.0, 0.0, 0.0, 0.5})};
    const ConstantReward one(1.0);
    // 60 m/s from 30 m short: the first step passes, later steps are not scored.
    CHECK(score_sequences(s, seqs, one, SimulatorDynamics{}, 1.0)[0] == 1.0);
}

TEST_CASE("non-finite rewards are planning errors") {
    const ConstantReward bad(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(cem_plan(reset(Task::Follow, 0), bad, small_planner(), SimulatorDynamics{}), PlanningError);
}

TEST_CASE("plans respect bounds, are seeded, and act takes the first step") {
    const OracleReward reward(Task::Chase);
    const ConstantReward flat(2.0);
    PlannerConfig cfg = small_planner();
    cfg.seed = 9;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const WorldState w = reset(Task::Chase, s);
        const auto plan = cem_plan(w, reward, cfg, SimulatorDynamics{});
        REQUIRE(plan.size() == static_cast<std::size_t>(cfg.horizon));
        for (const Action& a : plan) CHECK(within_bounds(a));
        CHECK(cem_plan(w, reward, cfg, SimulatorDynamics{}) == plan);
        CHECK(act(w, reward, cfg, SimulatorDynamics{}) == plan.front());
        for (const Action& a : cem_plan(w, flat, cfg, SimulatorDynamics{})) {
            CHECK(within_bounds(a));
            CHECK(std::isfinite(a.pitch + a.roll + a.yaw + a.thrust));
        }
    }
}

TEST_CASE("ensemble dynamics step through their members") {
    const int in = kDynamicsInputDim, out = kDynamicsOutputDim;
    Standardizer o1 = Standardizer::identity(out);
    o1.mean[0] = 10.0;
    auto ens = std::make_shared<DynamicsEnsemble>(DynamicsEnsemble::from_parts(
        Task::Follow, {MLP({in, 2, out}), MLP({in, 2, out})}, Standardizer::identity(in), o1));
    const EnsembleDynamics dyn(ens);
    CHECK(dyn.members() == 2);
    const WorldState s = reset(Task::Follow, 1);
    std::vector<WorldState> got(1);
    const std::vector<WorldState> ss{s};
    const std::vector<Action> aa{Action{}};
    dyn.step_batch(1, ss, aa, got);
    CHECK(got[0] == ens->predict(s, Action{}, 1));
    const std::vector<std::vector<Action>> seqs{{Action{}}};
    const OracleReward reward(Task::Follow);
    const double both = score_sequences(s, seqs, reward, dyn, 1.0)[0];
    const WorldState n = ens->predict(s, Action{}, 0);
    CHECK(both == doctest::Approx(oracle_reward(Task::Follow, phi(s, Action{}, n))));
}

TEST_CASE("oracle planner on follow returns at least five times the random policy") {
    ExperimentConfig cfg;
    cfg.task = Task::Follow;
    const SimulatorDynamics dyn;
    const OracleReward reward(Task::Follow);
    const PolicyEvaluation agent = evaluate_policy(reward, cfg, 20, dyn);
    const PolicyEvaluation random = evaluate_random_policy(cfg, 20);
    REQUIRE(random.mean < 0.0);
    MESSAGE("oracle/random return ratio " << agent.mean / random.mean);
    CHECK(agent.mean > random.mean);
    CHECK(agent.mean / random.mean < 0.2);
}
