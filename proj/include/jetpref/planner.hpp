#pragma once

#include "jetpref/dynamics.hpp"
#include "jetpref/reward_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace jetpref {

enum class DynamicsMode { TrueSimulator, LearnedEnsemble };

std::string_view dynamics_mode_name(DynamicsMode m);
DynamicsMode parse_dynamics_mode(std::string_view name);

struct PlannerConfig {
    int horizon = 10;
    double discount = 1.0;
    int iterations = 10;
    int candidates = 20;
    int elites = 5;
    double learning_rate = 0.5;
    /// Initial std as a fraction of each action dimension's half-range.
    double initial_std = 0.5;
    std::uint64_t seed = 0;
    DynamicsMode model = DynamicsMode::TrueSimulator;

    void validate() const;
};

/// Candidate action sequences are dim x horizon matrices.
using CemScoreFn = std::function<void(std::span<const Eigen::MatrixXd> candidates, std::span<double> scores)>;

struct CemResult {
    Eigen::MatrixXd mean;  // final mean, clamped to bounds
    std::vector<double> elite_mean_scores;  // per iteration
};

/// Cross-entropy method over box-bounded sequences with independent normals
/// per (dimension, timestep). Samples are clamped to bounds; mean and variance
/// move toward the elite statistics at cfg.learning_rate.
CemResult cem_optimize(const CemScoreFn& score, const Eigen::Ref<const Eigen::VectorXd>& lo,
                       const Eigen::Ref<const Eigen::VectorXd>& hi, const Eigen::Ref<const Eigen::MatrixXd>& init_mean,
                       const Eigen::Ref<const Eigen::MatrixXd>& init_std, const PlannerConfig& cfg,
                       std::uint64_t seed);

/// World model used for planning: one or more deterministic members.
class PlanningDynamics {
public:
    virtual ~PlanningDynamics() = default;
    virtual int members() const = 0;
    virtual void step_batch(int member, std::span<const WorldState> s, std::span<const Action> a,
                            std::span<WorldState> out) const = 0;
};

/// The simulator itself, including RJ's scripted motion.
class SimulatorDynamics final : public PlanningDynamics {
public:
    int members() const override { return 1; }
    void step_batch(int member, std::span<const WorldState> s, std::span<const Action> a,
                    std::span<WorldState> out) const override;
};

class EnsembleDynamics final : public PlanningDynamics {
public:
    explicit EnsembleDynamics(std::shared_ptr<const DynamicsEnsemble> ensemble) : ensemble_(std::move(ensemble)) {}
    int members() const override { return ensemble_->members(); }
    void step_batch(int member, std::span<const WorldState> s, std::span<const Action> a,
                    std::span<WorldState> out) const override {
        ensemble_->predict_batch(member, s, a, out);
    }
    const DynamicsEnsemble& ensemble() const { return *ensemble_; }

private:
    std::shared_ptr<const DynamicsEnsemble> ensemble_;
};

/// Scores of action sequences from s: sum over h of discount^h reward(phi),
/// averaged over dynamics members. For Land, steps after EJ passes the
/// threshold are not scored. Throws PlanningError on non-finite rewards.
std::vector<double> score_sequences(const WorldState& s, std::span<const std::vector<Action>> sequences,
                                    const RewardModel& reward, const PlanningDynamics& dynamics, double discount);

/// H-step plan maximizing model return through the dynamics.
std::vector<Action> cem_plan(const WorldState& s, const RewardModel& reward, const PlannerConfig& cfg,
                             const PlanningDynamics& dynamics);

/// First action of a fresh plan.
Action act(const WorldState& s, const RewardModel& reward, const PlannerConfig& cfg, const PlanningDynamics& dynamics);

}  // namespace jetpref
