#pragma once

#include "jetpref/features.hpp"
#include "jetpref/rewardtree.hpp"

#include <memory>
#include <span>
#include <string>

namespace jetpref {

/// Transition reward function used by the planner and the evaluation suite.
class RewardModel {
public:
    virtual ~RewardModel() = default;

    virtual double reward(const FeatureVector& x) const = 0;
    /// Batched evaluation; out.size() must equal xs.size().
    virtual void reward_batch(std::span<const FeatureVector> xs, std::span<double> out) const;
    virtual std::string kind() const = 0;
};

using RewardModelPtr = std::shared_ptr<const RewardModel>;

class ZeroReward final : public RewardModel {
public:
    double reward(const FeatureVector&) const override { return 0.0; }
    std::string kind() const override { return "zero"; }
};

class OracleReward final : public RewardModel {
public:
    explicit OracleReward(Task task) : task_(task) {}
    double reward(const FeatureVector& x) const override;
    std::string kind() const override { return "oracle"; }

private:
    Task task_;
};

class TreeReward final : public RewardModel {
public:
    explicit TreeReward(RewardTree tree) : tree_(std::move(tree)) {}
    double reward(const FeatureVector& x) const override { return tree_.predict(x); }
    std::string kind() const override { return "tree"; }
    const RewardTree& tree() const { return tree_; }

private:
    RewardTree tree_;
};

/// Model return of a trajectory: plain sum of per-transition rewards.
double model_return(const RewardModel& model, const Trajectory& traj);

}  // namespace jetpref
