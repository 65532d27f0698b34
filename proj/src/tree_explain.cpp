#include "jetpref/error.hpp"
#include "jetpref/rewardtree.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace jetpref {

double Explanation::total() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

std::string Explanation::render_text() const {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", total());
    out << "trajectory " << trajectory_id << ": " << leaves.size() << " timesteps, return " << buf << "\n";
    for (const auto& s : segments) {
        std::snprintf(buf, sizeof buf, "%.6g", s.reward);
        out << "  t " << s.start << "-" << s.end << ": leaf " << s.leaf << " (reward " << buf << " per step)\n";
        out << "    when " << render_conditions(s.rule) << "\n";
    }
    return out.str();
}

Json Explanation::to_json() const {
    Json segs = Json::array();
    for (const auto& s : segments) {
        Json rule = Json::array();
        for (const auto& c : s.rule) {
            rule.push_back(Json{{"feature", feature_names()[c.feature]},
                                {"op", c.greater_equal ? ">=" : "<"},
                                {"threshold", c.threshold}});
        }
        segs.push_back(Json{{"start", s.start}, {"end", s.end}, {"leaf", s.leaf}, {"reward", s.reward}, {"rule", rule}});
    }
    return Json{{"trajectory", trajectory_id},
                {"leaves", leaves},
                {"rewards", rewards},
                {"total", total()},
                {"segments", segs}};
}

Explanation explain_trajectory(const RewardTree& tree, const Trajectory& traj) {
    Explanation e;
    e.trajectory_id = traj.id;
    for (const auto& tr : traj.transitions) {
        const int l = tree.leaf_index(tr.x);
        e.leaves.push_back(l);
        e.rewards.push_back(tree.leaf(l).reward);
    }
    for (std::size_t t = 0; t < e.leaves.size(); ++t) {
        if (t > 0 && e.leaves[t] == e.leaves[t - 1]) {
            e.segments.back().end = static_cast<int>(t) + 1;
            continue;
        }
        ExplanationSegment s;
        s.start = s.end = static_cast<int>(t) + 1;
        s.leaf = e.leaves[t];
        s.reward = e.rewards[t];
        s.rule = tree.leaf_conditions(s.leaf);
        e.segments.push_back(std::move(s));
    }
    return e;
}

std::vector<LeafPairPreference> preferences_between_leaves(const PreferenceGraph& graph, const RewardTree& tree,
                                                           int leaf_a, int leaf_b) {
    if (leaf_a < 0 || leaf_a >= tree.num_leaves() || leaf_b < 0 || leaf_b >= tree.num_leaves()) {
        throw InputError("leaf id out of range");
    }
    std::vector<std::pair<bool, bool>> visits;
    visits.reserve(static_cast<std::size_t>(graph.num_trajectories()));
    for (const auto& traj : graph.trajectories()) {
        const auto counts = tree.leaf_counts(traj);
        visits.emplace_back(counts[static_cast<std::size_t>(leaf_a)] > 0, counts[static_cast<std::size_t>(leaf_b)] > 0);
    }
    auto only_a = [&](int id) { return visits[static_cast<std::size_t>(id)].first && !visits[static_cast<std::size_t>(id)].second; };
    auto only_b = [&](int id) { return visits[static_cast<std::size_t>(id)].second && !visits[static_cast<std::size_t>(id)].first; };
    std::vector<LeafPairPreference> out;
    for (const auto& e : graph.edges()) {
        if (only_a(e.i) && only_b(e.j)) {
            out.push_back({e, e.i, e.j});
        } else if (only_b(e.i) && only_a(e.j)) {
            out.push_back({e, e.j, e.i});
        }
    }
    return out;
}

}  // namespace jetpref
