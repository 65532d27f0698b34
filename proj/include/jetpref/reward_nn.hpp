#pragma once

#include "jetpref/mlp.hpp"
#include "jetpref/adam.hpp"
#include "jetpref/prefgraph.hpp"
#include "jetpref/reward_model.hpp"

#include <filesystem>
#include <random>

namespace jetpref {

struct RewardNNConfig {
    int hidden_layers = 3;
    int hidden_units = 256;
    int batches_per_update = 100;
    int batch_size = 32;
    double learning_rate = 3e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Feature standardization fitted on uniform-random rollouts of a task.
Standardizer feature_standardizer(Task task, int rollouts, std::uint64_t seed);

/// Neural reward baseline trained on the preference NLL. Training continues
/// from the current parameters on every update.
class RewardNN final : public RewardModel {
public:
    static constexpr int kFormatVersion = 1;

    RewardNN(RewardNNConfig cfg, Standardizer input_norm);

    /// batches_per_update Adam steps on mini-batches of edges sampled with
    /// replacement. Returns the mean batch loss. Throws TrainingError when edgeless.
    double update(const PreferenceGraph& graph);

    double reward(const FeatureVector& x) const override;
    void reward_batch(std::span<const FeatureVector> xs, std::span<double> out) const override;
    std::string kind() const override { return "reward-nn"; }

    const MLP& net() const { return net_; }
    MLP& net() { return net_; }
    const Standardizer& input_norm() const { return norm_; }
    const RewardNNConfig& config() const { return cfg_; }
    int updates() const { return updates_; }

    Json to_json() const;
    static RewardNN from_json(const Json& j);
    void save_file(const std::filesystem::path& path) const;
    static RewardNN load_file(const std::filesystem::path& path);

private:
    Json optimizer_json() const;
    void restore_optimizer(const Json& j);

    RewardNNConfig cfg_;
    Standardizer norm_;
    MLP net_;
    AdamState adam_;
    std::mt19937_64 rng_;
    int updates_ = 0;
};

}  // namespace jetpref
