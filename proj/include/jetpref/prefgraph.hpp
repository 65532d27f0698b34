#pragma once

#include "jetpref/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace jetpref {

enum class LabelSource { Oracle, Human };

std::string_view label_source_name(LabelSource s);

/// Edge (i, j): trajectory j is preferred over trajectory i.
struct PreferenceEdge {
    int i = -1;
    int j = -1;
    LabelSource source = LabelSource::Oracle;
    std::int64_t timestamp = 0;

    bool operator==(const PreferenceEdge&) const = default;
};

/// Trajectory store plus directed preference edges. Not internally
/// synchronized: one writer at a time, readers on a quiescent graph.
class PreferenceGraph {
public:
    static constexpr int kFormatVersion = 1;

    explicit PreferenceGraph(Task task = Task::Follow) : task_(task) {}

    Task task() const { return task_; }

    /// Assigns the next sequential id and stores the trajectory.
    int add_trajectory(Trajectory traj);

    /// Throws InputError on self-edges, unknown ids, or an existing (i, j).
    void add_preference(int i, int j, LabelSource source = LabelSource::Oracle, std::int64_t timestamp = 0);

    bool has_edge(int i, int j) const;
    /// True if (a, b) or (b, a) is present.
    bool compared(int a, int b) const;

    int num_trajectories() const { return static_cast<int>(trajectories_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    bool contains(int id) const { return id >= 0 && id < num_trajectories(); }

    const Trajectory& trajectory(int id) const;
    std::span<const Trajectory> trajectories() const { return trajectories_; }
    std::span<const PreferenceEdge> edges() const { return edges_; }

    /// Up to k_batch pairs (existing, new_id) with existing ids drawn uniformly
    /// without replacement among those not yet compared with new_id.
    std::vector<std::pair<int, int>> sample_queries(int new_id, int k_batch, std::uint64_t seed) const;

    void save(std::ostream& out) const;
    static PreferenceGraph load(std::istream& in);
    void save_file(const std::filesystem::path& path) const;
    static PreferenceGraph load_file(const std::filesystem::path& path);

private:
    static PreferenceGraph load_records(std::istream& in);
    static std::uint64_t key(int i, int j) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32u) | static_cast<std::uint32_t>(j);
    }

    Task task_;
    std::vector<Trajectory> trajectories_;
    std::vector<PreferenceEdge> edges_;
    std::unordered_set<std::uint64_t> edge_keys_;
};

/// An edge (i, j) is mispredicted when g_j - g_i <= tie_tolerance, i.e.
/// P(j preferred) <= 0.5 under Bradley-Terry; ties count as errors.
inline bool mispredicted(double g_i, double g_j, double tie_tolerance = 0.0) {
    return g_j - g_i <= tie_tolerance;
}

struct ZeroOneLoss {
    int count = 0;
    double fraction = 0.0;
};

/// predicted_returns is indexed by trajectory id; NaN marks a missing value.
/// Throws InputError when an edge endpoint has no prediction.
ZeroOneLoss loss_0_1(const PreferenceGraph& g, std::span<const double> predicted_returns,
                     double tie_tolerance = 0.0);

/// Bradley-Terry NLL with beta = 1 summed over edges.
double loss_nll(const PreferenceGraph& g, std::span<const double> predicted_returns);

/// log(1 + exp(z)) without overflow.
double softplus(double z);

}  // namespace jetpref
