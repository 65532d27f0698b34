#pragma once

#include "jetpref/features.hpp"
#include "jetpref/prefgraph.hpp"
#include "jetpref/serialization.hpp"

#include <array>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace jetpref {

enum class SplitCriterion { ZeroOne, Variance };

std::string_view split_criterion_name(SplitCriterion c);
SplitCriterion parse_split_criterion(std::string_view name);

struct InductionConfig {
    SplitCriterion split_criterion = SplitCriterion::ZeroOne;
    int max_leaves = 100;
    double alpha = 5e-3;
    double adam_learning_rate = 0.1;
    double convergence_threshold = 1e-5;
    int max_adam_steps = 100000;
    /// 0 keeps every midpoint; otherwise at most this many evenly-spaced
    /// midpoints per feature are offered.
    int max_thresholds_per_feature = 0;

    void validate() const;
};

/// Return estimates indexed by trajectory id. Trajectories without any
/// incident edge are marked non-participating and hold 0.
struct ReturnEstimates {
    std::vector<double> g;
    std::vector<char> participating;
    int adam_steps = 0;
};

/// Bradley-Terry NLL (beta = 1) over local edges, and its gradient.
double return_loss(std::span<const std::pair<int, int>> edges, std::span<const double> g);
void return_loss_gradient(std::span<const std::pair<int, int>> edges, std::span<const double> g,
                          std::span<double> grad);

/// Minimizes the return loss with Adam from zero, then rescales to population
/// std = mean length and shifts to min 0. Throws InductionError when edgeless.
ReturnEstimates estimate_returns(const PreferenceGraph& graph, const InductionConfig& cfg = {});

/// Rescale/shift in place (the normalization step alone).
void normalize_returns(std::span<double> g, std::span<const int> lengths);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;   // x[feature] <  threshold
    int right = -1;  // x[feature] >= threshold
    int leaf_id = -1;
    double reward = 0.0;
    /// (trajectory id, timesteps in this leaf) at induction time.
    std::vector<std::pair<int, int>> support;

    bool is_leaf() const { return feature < 0; }
    int support_timesteps() const;
};

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();  // inclusive
    double hi = std::numeric_limits<double>::infinity();   // exclusive
};

struct Condition {
    std::size_t feature = 0;
    bool greater_equal = false;  // x >= threshold, otherwise x < threshold
    double threshold = 0.0;

    bool holds(const FeatureVector& x) const {
        return greater_equal ? x[feature] >= threshold : x[feature] < threshold;
    }
};

/// Axis-aligned binary rule hierarchy with a reward per leaf. Leaf ids are
/// assigned in depth-first, left-first order.
class RewardTree {
public:
    static constexpr int kFormatVersion = 1;

    /// Single leaf predicting reward.
    explicit RewardTree(double reward = 0.0);
    /// Validates structure and assigns leaf ids. Node 0 is the root.
    static RewardTree from_nodes(std::vector<TreeNode> nodes);

    int num_leaves() const { return static_cast<int>(leaf_nodes_.size()); }
    int num_internal() const { return static_cast<int>(nodes_.size()) - num_leaves(); }
    std::span<const TreeNode> nodes() const { return nodes_; }
    const TreeNode& leaf(int leaf_id) const { return nodes_.at(static_cast<std::size_t>(leaf_nodes_.at(static_cast<std::size_t>(leaf_id)))); }

    int leaf_index(const FeatureVector& x) const;
    double predict(const FeatureVector& x) const { return leaf(leaf_index(x)).reward; }

    /// Timesteps per leaf for a trajectory.
    std::vector<int> leaf_counts(const Trajectory& traj) const;
    /// Sum over leaves of (timesteps in leaf) * reward, in leaf-id order.
    double trajectory_return(const Trajectory& traj) const;

    /// Conjunction of path conditions for a leaf, simplified to one interval per feature.
    std::vector<Condition> leaf_conditions(int leaf_id) const;
    std::array<Interval, kNumFeatures> leaf_region(int leaf_id) const;

    /// Indented rule rendering.
    std::string render_text() const;

    Json to_json() const;
    static RewardTree from_json(const Json& j);
    void save_file(const std::filesystem::path& path) const;
    static RewardTree load_file(const std::filesystem::path& path);

    bool operator==(const RewardTree& other) const;

private:
    std::vector<TreeNode> nodes_;
    std::vector<int> leaf_nodes_;  // leaf id -> node index
};

std::string render_conditions(std::span<const Condition> conds);

/// Sets every leaf's reward to the time-weighted average of g over the
/// trajectories' timesteps in it, and records supports. g is indexed by
/// trajectory id. Throws InductionError when a leaf receives no timesteps.
RewardTree with_leaf_rewards(const RewardTree& tree, std::span<const Trajectory> trajectories,
                             std::span<const double> g);

/// Tolerance below which a predicted return gap counts as a tie.
double tie_tolerance(std::span<const double> g);

/// Predicted returns of every graph trajectory under the tree (by id).
std::vector<double> predicted_returns(const RewardTree& tree, const PreferenceGraph& graph);

struct GrowthResult {
    RewardTree tree;
    /// l0-1 count of the tree after each accepted split (entry 0 = root).
    std::vector<int> loss_history;
};

/// Greedy growth from a single leaf over the participating trajectories.
GrowthResult grow(const PreferenceGraph& graph, const ReturnEstimates& returns, const InductionConfig& cfg);

struct PruningStep {
    RewardTree tree;
    int loss_count = 0;
};

/// Nested subtrees from the input down to the root, each removing the rule
/// whose collapse gives the lowest l0-1.
/// Collapsed leaves get their rewards recomputed from the return estimates.
std::vector<PruningStep> pruning_sequence(const RewardTree& tree, const PreferenceGraph& graph,
                                          const ReturnEstimates& returns, double tie_tol);

/// argmin over the pruning sequence of l0-1 fraction + alpha * leaves; ties
/// go to the smaller tree.
RewardTree prune(const RewardTree& tree, const PreferenceGraph& graph, const ReturnEstimates& returns,
                 const InductionConfig& cfg);

struct InductionResult {
    RewardTree tree;
    ReturnEstimates returns;
    std::vector<int> growth_loss_history;
    int grown_leaves = 1;
    ZeroOneLoss loss;
};

/// Return estimation, growth and pruning from scratch.
InductionResult induce(const PreferenceGraph& graph, const InductionConfig& cfg);

struct ExplanationSegment {
    int start = 1;  // first timestep, 1-based
    int end = 1;    // last timestep, inclusive
    int leaf = 0;
    double reward = 0.0;
    std::vector<Condition> rule;
};

struct Explanation {
    int trajectory_id = -1;
    std::vector<int> leaves;      // per timestep
    std::vector<double> rewards;  // per timestep
    std::vector<ExplanationSegment> segments;

    double total() const;
    std::string render_text() const;
    Json to_json() const;
};

Explanation explain_trajectory(const RewardTree& tree, const Trajectory& traj);

struct LeafPairPreference {
    PreferenceEdge edge;
    int visits_a = -1;  // endpoint visiting leaf a only
    int visits_b = -1;  // endpoint visiting leaf b only
};

/// Edges whose endpoints separate into one visitor of leaf_a only and one of
/// leaf_b only. Sorted by edge order in the graph.
std::vector<LeafPairPreference> preferences_between_leaves(const PreferenceGraph& graph, const RewardTree& tree,
                                                           int leaf_a, int leaf_b);

}  // namespace jetpref
