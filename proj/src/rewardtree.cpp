#include "jetpref/rewardtree.hpp"

#include "jetpref/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jetpref {

std::string_view split_criterion_name(SplitCriterion c) {
    return c == SplitCriterion::ZeroOne ? "zero-one" : "variance";
}

SplitCriterion parse_split_criterion(std::string_view name) {
    if (name == "zero-one" || name == "0-1") return SplitCriterion::ZeroOne;
    if (name == "variance" || name == "var") return SplitCriterion::Variance;
    throw ConfigError("unknown split criterion '" + std::string(name) + "'");
}

void InductionConfig::validate() const {
    if (max_leaves < 1) throw ConfigError("tree.max_leaves must be >= 1");
    if (!(alpha >= 0.0)) throw ConfigError("tree.alpha must be >= 0");
    if (!(adam_learning_rate > 0.0)) throw ConfigError("tree.adam_lr must be > 0");
    if (!(convergence_threshold > 0.0)) throw ConfigError("tree.convergence must be > 0");
    if (max_adam_steps < 1) throw ConfigError("tree.max_adam_steps must be >= 1");
    if (max_thresholds_per_feature < 0) throw ConfigError("tree.max_thresholds must be >= 0");
}

int TreeNode::support_timesteps() const {
    int n = 0;
    for (const auto& [id, c] : support) n += c;
    return n;
}

RewardTree::RewardTree(double reward) {
    TreeNode root;
    root.reward = reward;
    root.leaf_id = 0;
    nodes_.push_back(std::move(root));
    leaf_nodes_.push_back(0);
}

RewardTree RewardTree::from_nodes(std::vector<TreeNode> nodes) {
    if (nodes.empty()) throw InputError("tree has no nodes");
    RewardTree tree;
    tree.nodes_ = std::move(nodes);
    tree.leaf_nodes_.clear();
    std::vector<char> seen(tree.nodes_.size(), 0);
    // Depth-first, left-first, carrying the interval of each feature.
    struct Frame {
        int node;
        std::array<Interval, kNumFeatures> region;
    };
    std::vector<Frame> stack;
    stack.push_back({0, {}});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        if (fr.node < 0 || static_cast<std::size_t>(fr.node) >= tree.nodes_.size()) {
            throw InputError("tree child index out of range");
        }
        auto& seen_flag = seen[static_cast<std::size_t>(fr.node)];
        if (seen_flag) throw InputError("tree node reached twice");
        seen_flag = 1;
        TreeNode& n = tree.nodes_[static_cast<std::size_t>(fr.node)];
        if (n.is_leaf()) {
            n.leaf_id = static_cast<int>(tree.leaf_nodes_.size());
            tree.leaf_nodes_.push_back(fr.node);
            continue;
        }
        if (static_cast<std::size_t>(n.feature) >= kNumFeatures) throw InputError("tree feature out of range");
        const Interval iv = fr.region[static_cast<std::size_t>(n.feature)];
        if (!(n.threshold > iv.lo && n.threshold < iv.hi) || !std::isfinite(n.threshold)) {
            throw InputError("tree rule on '" + std::string(feature_names()[static_cast<std::size_t>(n.feature)]) +
                             "' contradicts an ancestor");
        }
        n.leaf_id = -1;
        Frame left{n.left, fr.region};
        left.region[static_cast<std::size_t>(n.feature)].hi = n.threshold;
        Frame right{n.right, fr.region};
        right.region[static_cast<std::size_t>(n.feature)].lo = n.threshold;
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw InputError("tree has unreachable nodes");
    return tree;
}

int RewardTree::leaf_index(const FeatureVector& x) const {
    const TreeNode* n = &nodes_[0];
    while (!n->is_leaf()) {
        const int next = x[static_cast<std::size_t>(n->feature)] < n->threshold ? n->left : n->right;
        n = &nodes_[static_cast<std::size_t>(next)];
    }
    return n->leaf_id;
}

std::vector<int> RewardTree::leaf_counts(const Trajectory& traj) const {
    std::vector<int> counts(static_cast<std::size_t>(num_leaves()), 0);
    for (const auto& tr : traj.transitions) ++counts[static_cast<std::size_t>(leaf_index(tr.x))];
    return counts;
}

double RewardTree::trajectory_return(const Trajectory& traj) const {
    const auto counts = leaf_counts(traj);
    double g = 0.0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        if (counts[l] != 0) g += counts[l] * leaf(static_cast<int>(l)).reward;
    }
    return g;
}

std::array<Interval, kNumFeatures> RewardTree::leaf_region(int leaf_id) const {
    // Walk down from the root following the leaf's recorded position.
    std::vector<int> parent(nodes_.size(), -1);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        if (!nodes_[k].is_leaf()) {
            parent[static_cast<std::size_t>(nodes_[k].left)] = static_cast<int>(k);
            parent[static_cast<std::size_t>(nodes_[k].right)] = static_cast<int>(k);
        }
    }
    std::array<Interval, kNumFeatures> region{};
    int child = leaf_nodes_.at(static_cast<std::size_t>(leaf_id));
    for (int p = parent[static_cast<std::size_t>(child)]; p >= 0; child = p, p = parent[static_cast<std::size_t>(p)]) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(p)];
        Interval& iv = region[static_cast<std::size_t>(n.feature)];
        if (n.left == child) {
            iv.hi = std::min(iv.hi, n.threshold);
        } else {
            iv.lo = std::max(iv.lo, n.threshold);
        }
    }
    return region;
}

std::vector<Condition> RewardTree::leaf_conditions(int leaf_id) const {
    const auto region = leaf_region(leaf_id);
    std::vector<Condition> out;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (std::isfinite(region[f].lo)) out.push_back({f, true, region[f].lo});
        if (std::isfinite(region[f].hi)) out.push_back({f, false, region[f].hi});
    }
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void render_node(const RewardTree& tree, int idx, int depth, std::ostringstream& out) {
    const TreeNode& n = tree.nodes()[static_cast<std::size_t>(idx)];
    const std::string pad(static_cast<std::size_t>(depth) * 4, ' ');
    if (n.is_leaf()) {
        out << pad << "leaf " << n.leaf_id << ": reward " << fmt(n.reward) << " (" << n.support_timesteps()
            << " timesteps, " << n.support.size() << " trajectories)\n";
        return;
    }
    const auto name = feature_names()[static_cast<std::size_t>(n.feature)];
    out << pad << "if " << name << " < " << fmt(n.threshold) << ":\n";
    render_node(tree, n.left, depth + 1, out);
    out << pad << "else:  # " << name << " >= " << fmt(n.threshold) << "\n";
    render_node(tree, n.right, depth + 1, out);
}

}  // namespace

std::string render_conditions(std::span<const Condition> conds) {
    if (conds.empty()) return "(always)";
    std::string s;
    for (std::size_t k = 0; k < conds.size(); ++k) {
        if (k) s += " and ";
        s += feature_names()[conds[k].feature];
        s += conds[k].greater_equal ? " >= " : " < ";
        s += fmt(conds[k].threshold);
    }
    return s;
}

std::string RewardTree::render_text() const {
    std::ostringstream out;
    render_node(*this, 0, 0, out);
    return out.str();
}

Json RewardTree::to_json() const {
    Json nodes = Json::array();
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const TreeNode& n = nodes_[k];
        if (n.is_leaf()) {
            Json support = Json::array();
            for (const auto& [id, c] : n.support) support.push_back(Json::array({id, c}));
            nodes.push_back(Json{{"id", k}, {"leaf", n.leaf_id}, {"reward", n.reward}, {"support", support}});
        } else {
            nodes.push_back(Json{{"id", k},
                                 {"feature", feature_names()[static_cast<std::size_t>(n.feature)]},
                                 {"threshold", n.threshold},
                                 {"left", n.left},
                                 {"right", n.right}});
        }
    }
    return Json{{"format", "jetpref-tree"},
                {"version", kFormatVersion},
                {"schema_hash", feature_schema_hash()},
                {"leaves", num_leaves()},
                {"nodes", nodes}};
}

RewardTree RewardTree::from_json(const Json& j) {
    if (j.value("format", "") != "jetpref-tree") throw InputError("not a tree file");
    if (j.at("version").get<int>() != kFormatVersion) throw InputError("unsupported tree file version");
    if (j.at("schema_hash").get<std::string>() != feature_schema_hash()) {
        throw InputError("tree file feature schema does not match");
    }
    const Json& arr = j.at("nodes");
    std::vector<TreeNode> nodes(arr.size());
    for (const auto& rec : arr) {
        const auto id = rec.at("id").get<std::size_t>();
        if (id >= nodes.size()) throw InputError("tree node id out of range");
        TreeNode& n = nodes[id];
        if (rec.contains("feature")) {
            n.feature = static_cast<int>(feature_index(rec.at("feature").get<std::string>()));
            n.threshold = rec.at("threshold").get<double>();
            n.left = rec.at("left").get<int>();
            n.right = rec.at("right").get<int>();
        } else {
            n.reward = rec.at("reward").get<double>();
            for (const auto& s : rec.at("support")) n.support.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
        }
    }
    return from_nodes(std::move(nodes));
}

void RewardTree::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json().dump(1) << '\n';
}

RewardTree RewardTree::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    return from_json(Json::parse(in));
}

bool RewardTree::operator==(const RewardTree& other) const {
    if (nodes_.size() != other.nodes_.size()) return false;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const TreeNode& a = nodes_[k];
        const TreeNode& b = other.nodes_[k];
        if (a.feature != b.feature || a.left != b.left || a.right != b.right || a.leaf_id != b.leaf_id) return false;
        if (a.is_leaf() ? (a.reward != b.reward || a.support != b.support) : a.threshold != b.threshold) return false;
    }
    return true;
}

RewardTree with_leaf_rewards(const RewardTree& tree, std::span<const Trajectory> trajectories,
                             std::span<const double> g) {
    const auto leaves = static_cast<std::size_t>(tree.num_leaves());
    std::vector<double> weighted(leaves, 0.0);
    std::vector<int> totals(leaves, 0);
    std::vector<std::vector<std::pair<int, int>>> supports(leaves);
    for (const auto& traj : trajectories) {
        const auto counts = tree.leaf_counts(traj);
        const double w = g[static_cast<std::size_t>(traj.id)] / traj.length();
        for (std::size_t l = 0; l < leaves; ++l) {
            if (counts[l] == 0) continue;
            weighted[l] += w * counts[l];
            totals[l] += counts[l];
            supports[l].emplace_back(traj.id, counts[l]);
        }
    }
    std::vector<TreeNode> nodes(tree.nodes().begin(), tree.nodes().end());
    for (auto& n : nodes) {
        if (!n.is_leaf()) continue;
        const auto l = static_cast<std::size_t>(n.leaf_id);
        if (totals[l] == 0) throw InductionError("leaf " + std::to_string(l) + " contains no timesteps");
        n.reward = weighted[l] / totals[l];
        n.support = std::move(supports[l]);
    }
    return RewardTree::from_nodes(std::move(nodes));
}

double tie_tolerance(std::span<const double> g) {
    double scale = 1.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    return 1e-9 * scale;
}

std::vector<double> predicted_returns(const RewardTree& tree, const PreferenceGraph& graph) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(graph.num_trajectories()));
    for (const auto& traj : graph.trajectories()) out.push_back(tree.trajectory_return(traj));
    return out;
}

}  // namespace jetpref
