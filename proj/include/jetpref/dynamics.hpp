#pragma once

#include "jetpref/adam.hpp"
#include "jetpref/flightsim.hpp"
#include "jetpref/mlp.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace jetpref {

/// Network input: RJ position relative to EJ, sin/cos of both attitudes, both
/// speeds, RJ altitude, and the clamped action.
inline constexpr int kDynamicsInputDim = 22;
/// Predicted deltas: EJ position, roll, pitch, yaw, speed, then the same for RJ.
inline constexpr int kDynamicsOutputDim = 14;

Eigen::VectorXd dynamics_input(const WorldState& w, const Action& a);
/// Angle deltas are wrapped to (-pi, pi].
Eigen::VectorXd dynamics_delta(const WorldState& s, const WorldState& s_next);
/// Next state from a predicted delta. Thrust follows the action; velocity is
/// recomputed from speed and attitude; t advances by one.
WorldState apply_dynamics_delta(const WorldState& w, const Action& a, const Eigen::Ref<const Eigen::VectorXd>& delta);

struct TransitionSample {
    WorldState state;
    Action action;
    WorldState next;
};

/// Uniform-random-policy transitions, whole episodes until n are collected.
std::vector<TransitionSample> collect_random_transitions(Task task, int n, std::uint64_t seed);

struct DynamicsConfig {
    int members = 5;
    int hidden_layers = 4;
    int hidden_units = 64;
    int batches = 10000;
    int batch_size = 256;
    double learning_rate = 1e-3;
    int transitions = 10000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic ensemble predicting standardized next-state deltas.
class DynamicsEnsemble {
public:
    static constexpr int kFormatVersion = 1;

    /// Throws TrainingError on an empty dataset.
    static DynamicsEnsemble train(std::span<const TransitionSample> data, const DynamicsConfig& cfg);
    /// Generic core: members learn targets (raw deltas, one column per sample)
    /// from inputs; both sides are standardized internally.
    static DynamicsEnsemble fit(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                const Eigen::Ref<const Eigen::MatrixXd>& targets, const DynamicsConfig& cfg,
                                Task task = Task::Follow);

    int members() const { return static_cast<int>(nets_.size()); }
    Task task() const { return task_; }
    const MLP& member(int m) const { return nets_.at(static_cast<std::size_t>(m)); }
    MLP& member(int m) { return nets_.at(static_cast<std::size_t>(m)); }
    const Standardizer& input_norm() const { return in_norm_; }
    const Standardizer& output_norm() const { return out_norm_; }
    /// Mini-batch loss per member, sampled every 100 batches.
    const std::vector<std::vector<double>>& loss_history() const { return loss_history_; }

    /// Raw (de-standardized) delta predictions of one member for input columns.
    Eigen::MatrixXd predict_delta(int member, const Eigen::Ref<const Eigen::MatrixXd>& inputs) const;

    /// Throws InputError when member is out of range.
    WorldState predict(const WorldState& s, const Action& a, int member) const;
    void predict_batch(int member, std::span<const WorldState> s, std::span<const Action> a,
                       std::span<WorldState> out) const;
    /// Mean squared error on standardized deltas for one member.
    double mse(std::span<const TransitionSample> data, int member) const;

    Json to_json() const;
    static DynamicsEnsemble from_json(const Json& j);
    void save_file(const std::filesystem::path& path) const;
    static DynamicsEnsemble load_file(const std::filesystem::path& path);

    /// Assembles an ensemble from given parts (tests, checkpoints).
    static DynamicsEnsemble from_parts(Task task, std::vector<MLP> nets, Standardizer in_norm, Standardizer out_norm);

private:
    Task task_ = Task::Follow;
    std::vector<MLP> nets_;
    Standardizer in_norm_;
    Standardizer out_norm_;
    std::vector<std::vector<double>> loss_history_;
};

}  // namespace jetpref
