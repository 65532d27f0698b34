#pragma once

#include "jetpref/rewardtree.hpp"

#include <array>
#include <vector>

namespace jetpref::detail {

/// Flattened view of the participating trajectories used during growth.
struct InductionData {
    std::vector<int> ids;       // local trajectory -> graph id
    std::vector<int> lengths;
    std::vector<double> g;      // normalized return estimates
    std::vector<double> w;      // g / T
    std::vector<FeatureVector> rows;
    std::vector<int> row_traj;  // row -> local trajectory
    std::vector<std::pair<int, int>> edges;  // local (i, j), j preferred
    double tie_tol = 0.0;

    static InductionData from_graph(const PreferenceGraph& graph, const ReturnEstimates& returns);
};

struct SplitChoice {
    bool found = false;
    int leaf = -1;  // grower leaf slot
    int feature = -1;
    double threshold = 0.0;
    int loss_count = 0;
    double variance_gain = 0.0;
};

/// Greedy tree growth state. Leaf slots are numbered by creation: a split
/// keeps the left child in the parent's slot and appends the right child.
class TreeGrower {
public:
    TreeGrower(const InductionData& data, const InductionConfig& cfg);

    int num_leaves() const { return static_cast<int>(leaves_.size()); }
    int loss_count() const { return loss_; }

    SplitChoice best_split() const;
    void apply(const SplitChoice& split);

    /// l0-1 count after splitting leaf slot at (feature, threshold), using the
    /// leaf-local update used by the split search.
    int split_loss_incremental(int leaf, int feature, double threshold) const;
    /// Same quantity from a full rebuild of the enlarged tree.
    int split_loss_bruteforce(int leaf, int feature, double threshold) const;
    /// Thresholds the search offers for this leaf and feature.
    std::vector<double> candidate_thresholds(int leaf, int feature) const;

    RewardTree export_tree() const;
    GrowthResult run();

private:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int slot = -1;
    };
    struct Leaf {
        int node = -1;
        std::array<std::vector<int>, kNumFeatures> sorted;
        int count = 0;
        double sum_w = 0.0;
        double reward = 0.0;
        std::vector<std::pair<int, int>> traj_counts;  // (local trajectory, timesteps)
        mutable bool variance_cached = false;
        mutable SplitChoice variance_best;
    };
    struct ScanSetup;

    void refresh_leaf(Leaf& leaf) const;
    void refresh_predictions();
    ScanSetup make_setup(int slot) const;
    void scan_zero_one(int slot, SplitChoice& best) const;
    SplitChoice scan_variance(int slot) const;
    double next_threshold(int feature, int row) const;

    const InductionData& data_;
    InductionConfig cfg_;
    std::array<std::vector<double>, kNumFeatures> next_mid_;  // per feature, per row
    std::vector<std::vector<std::pair<int, int>>> incidence_;  // local traj -> (edge, +1 if preferred)
    std::vector<Node> nodes_;
    std::vector<Leaf> leaves_;
    std::vector<double> pred_;  // predicted return per local trajectory
    std::vector<char> err_;     // per edge
    int loss_ = 0;
};

}  // namespace jetpref::detail
