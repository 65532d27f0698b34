#include "jetpref/detail/tree_grower.hpp"
#include "jetpref/error.hpp"
#include "jetpref/rewardtree.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <numeric>

namespace jetpref {
namespace detail {

InductionData InductionData::from_graph(const PreferenceGraph& graph, const ReturnEstimates& returns) {
    InductionData d;
    std::vector<int> local(static_cast<std::size_t>(graph.num_trajectories()), -1);
    for (const auto& traj : graph.trajectories()) {
        const auto id = static_cast<std::size_t>(traj.id);
        if (id >= returns.participating.size() || !returns.participating[id]) continue;
        const int t = static_cast<int>(d.ids.size());
        local[id] = t;
        d.ids.push_back(traj.id);
        d.lengths.push_back(traj.length());
        d.g.push_back(returns.g[id]);
        d.w.push_back(returns.g[id] / traj.length());
        for (const auto& tr : traj.transitions) {
            d.rows.push_back(tr.x);
            d.row_traj.push_back(t);
        }
    }
    for (const auto& e : graph.edges()) {
        const int i = local[static_cast<std::size_t>(e.i)];
        const int j = local[static_cast<std::size_t>(e.j)];
        if (i < 0 || j < 0) throw InductionError("edge endpoint missing from return estimates");
        d.edges.emplace_back(i, j);
    }
    d.tie_tol = tie_tolerance(d.g);
    return d;
}

struct TreeGrower::ScanSetup {
    int n_rows = 0;
    double sum_w = 0.0;
    int fixed = 0;  // errors on edges the split cannot change
    std::vector<double> base;  // per affected edge, gap contribution of other leaves
    std::vector<double> a;     // per affected edge, timestep count difference inside the leaf
    std::vector<int> traj_pos;                      // local trajectory -> position in leaf, or -1
    std::vector<int> inc_offset;                    // CSR over leaf positions
    std::vector<std::pair<int, double>> inc;        // (affected edge, sign)
};

namespace {

// Errors among the affected edges for child rewards (r_left, r_right), plus
// the fixed part. Returns early once the count exceeds limit.
int count_errors(const std::vector<double>& base, const std::vector<double>& bl, const std::vector<double>& br,
                 double r_left, double r_right, double tol, int fixed, int limit) {
    int cnt = fixed;
    const std::size_t n = base.size();
    const double* pb = base.data();
    const double* pl = bl.data();
    const double* pr = br.data();
    constexpr std::size_t kChunk = 256;
    for (std::size_t s = 0; s < n; s += kChunk) {
        const std::size_t e = std::min(n, s + kChunk);
        int c = 0;
        for (std::size_t k = s; k < e; ++k) c += (pb[k] + pl[k] * r_left + pr[k] * r_right <= tol) ? 1 : 0;
        cnt += c;
        if (cnt > limit) return cnt;
    }
    return cnt;
}

bool better_zero_one(int cnt, int f, double c, const SplitChoice& best) {
    if (!best.found) return true;
    if (cnt != best.loss_count) return cnt < best.loss_count;
    if (f != best.feature) return f < best.feature;
    return c < best.threshold;
}

bool better_variance(double gain, int f, double c, const SplitChoice& best) {
    if (!best.found) return true;
    if (gain != best.variance_gain) return gain > best.variance_gain;
    if (f != best.feature) return f < best.feature;
    return c < best.threshold;
}

}  // namespace

TreeGrower::TreeGrower(const InductionData& data, const InductionConfig& cfg) : data_(data), cfg_(cfg) {
    const std::size_t n_rows = data_.rows.size();
    if (n_rows == 0) throw InductionError("no timesteps to grow a tree on");

    // Offered thresholds: midpoints between adjacent unique values, optionally thinned.
    std::vector<int> order(n_rows);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::vector<double> values(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) values[r] = data_.rows[r][f];
        std::vector<double> uniq = values;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        std::vector<double> mids;
        for (std::size_t k = 0; k + 1 < uniq.size(); ++k) mids.push_back(0.5 * (uniq[k] + uniq[k + 1]));
        const auto cap = static_cast<std::size_t>(cfg_.max_thresholds_per_feature);
        if (cap > 0 && mids.size() > cap) {
            std::vector<double> thinned;
            for (std::size_t k = 0; k < cap; ++k) {
                const std::size_t idx = cap == 1 ? mids.size() / 2 : k * (mids.size() - 1) / (cap - 1);
                if (thinned.empty() || thinned.back() != mids[idx]) thinned.push_back(mids[idx]);
            }
            mids = std::move(thinned);
        }
        next_mid_[f].resize(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            const auto it = std::upper_bound(mids.begin(), mids.end(), values[r]);
            next_mid_[f][r] = it == mids.end() ? std::numeric_limits<double>::quiet_NaN() : *it;
        }
    }

    incidence_.assign(data_.ids.size(), {});
    for (std::size_t e = 0; e < data_.edges.size(); ++e) {
        const auto [i, j] = data_.edges[e];
        incidence_[static_cast<std::size_t>(i)].emplace_back(static_cast<int>(e), -1);
        incidence_[static_cast<std::size_t>(j)].emplace_back(static_cast<int>(e), +1);
    }

    Leaf root;
    root.node = 0;
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::vector<int> sorted = order;
        std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
            return data_.rows[static_cast<std::size_t>(a)][f] < data_.rows[static_cast<std::size_t>(b)][f];
        });
        root.sorted[f] = std::move(sorted);
    }
    refresh_leaf(root);
    Node n;
    n.slot = 0;
    nodes_.push_back(n);
    leaves_.push_back(std::move(root));
    refresh_predictions();
}

void TreeGrower::refresh_leaf(Leaf& leaf) const {
    const auto& rows = leaf.sorted[0];
    if (rows.empty()) throw InductionError("split produced an empty leaf");
    leaf.count = static_cast<int>(rows.size());
    std::vector<int> per_traj(data_.ids.size(), 0);
    for (int r : rows) ++per_traj[static_cast<std::size_t>(data_.row_traj[static_cast<std::size_t>(r)])];
    leaf.traj_counts.clear();
    leaf.sum_w = 0.0;
    for (std::size_t t = 0; t < per_traj.size(); ++t) {
        if (per_traj[t] == 0) continue;
        leaf.traj_counts.emplace_back(static_cast<int>(t), per_traj[t]);
        leaf.sum_w += data_.w[t] * per_traj[t];
    }
    leaf.reward = leaf.sum_w / leaf.count;
    leaf.variance_cached = false;
}

void TreeGrower::refresh_predictions() {
    pred_.assign(data_.ids.size(), 0.0);
    for (const Leaf& leaf : leaves_) {
        for (const auto& [t, c] : leaf.traj_counts) pred_[static_cast<std::size_t>(t)] += c * leaf.reward;
    }
    err_.assign(data_.edges.size(), 0);
    loss_ = 0;
    for (std::size_t e = 0; e < data_.edges.size(); ++e) {
        const auto [i, j] = data_.edges[e];
        err_[e] = mispredicted(pred_[static_cast<std::size_t>(i)], pred_[static_cast<std::size_t>(j)], data_.tie_tol);
        loss_ += err_[e];
    }
}

double TreeGrower::next_threshold(int feature, int row) const {
    return next_mid_[static_cast<std::size_t>(feature)][static_cast<std::size_t>(row)];
}

TreeGrower::ScanSetup TreeGrower::make_setup(int slot) const {
    const Leaf& leaf = leaves_[static_cast<std::size_t>(slot)];
    ScanSetup s;
    s.n_rows = leaf.count;
    s.sum_w = leaf.sum_w;
    s.traj_pos.assign(data_.ids.size(), -1);
    for (std::size_t k = 0; k < leaf.traj_counts.size(); ++k) {
        s.traj_pos[static_cast<std::size_t>(leaf.traj_counts[k].first)] = static_cast<int>(k);
    }
    std::vector<int> edge_local(data_.edges.size(), -1);
    std::vector<int> affected;
    s.inc_offset.push_back(0);
    for (const auto& [t, c] : leaf.traj_counts) {
        for (const auto& [e, sign] : incidence_[static_cast<std::size_t>(t)]) {
            auto& k = edge_local[static_cast<std::size_t>(e)];
            if (k < 0) {
                k = static_cast<int>(affected.size());
                affected.push_back(e);
            }
            s.inc.emplace_back(k, static_cast<double>(sign));
        }
        s.inc_offset.push_back(static_cast<int>(s.inc.size()));
    }
    auto count_in_leaf = [&](int t) {
        const int p = s.traj_pos[static_cast<std::size_t>(t)];
        return p < 0 ? 0 : leaf.traj_counts[static_cast<std::size_t>(p)].second;
    };
    s.base.reserve(affected.size());
    s.a.reserve(affected.size());
    int affected_errors = 0;
    for (int e : affected) {
        const auto [i, j] = data_.edges[static_cast<std::size_t>(e)];
        const int ni = count_in_leaf(i), nj = count_in_leaf(j);
        const double bi = pred_[static_cast<std::size_t>(i)] - ni * leaf.reward;
        const double bj = pred_[static_cast<std::size_t>(j)] - nj * leaf.reward;
        s.base.push_back(bj - bi);
        s.a.push_back(static_cast<double>(nj - ni));
        affected_errors += err_[static_cast<std::size_t>(e)];
    }
    s.fixed = loss_ - affected_errors;
    return s;
}

void TreeGrower::scan_zero_one(int slot, SplitChoice& best) const {
    const Leaf& leaf = leaves_[static_cast<std::size_t>(slot)];
    if (leaf.count < 2) return;
    const ScanSetup s = make_setup(slot);
    std::vector<double> bl(s.base.size()), br(s.base.size());
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::fill(bl.begin(), bl.end(), 0.0);
        std::copy(s.a.begin(), s.a.end(), br.begin());
        const auto& rows = leaf.sorted[f];
        double sl = 0.0;
        int nl = 0;
        for (std::size_t p = 0; p + 1 < rows.size(); ++p) {
            const int row = rows[p];
            const int t = data_.row_traj[static_cast<std::size_t>(row)];
            sl += data_.w[static_cast<std::size_t>(t)];
            ++nl;
            const int pos = s.traj_pos[static_cast<std::size_t>(t)];
            for (int q = s.inc_offset[static_cast<std::size_t>(pos)]; q < s.inc_offset[static_cast<std::size_t>(pos) + 1]; ++q) {
                const auto& [k, sign] = s.inc[static_cast<std::size_t>(q)];
                bl[static_cast<std::size_t>(k)] += sign;
                br[static_cast<std::size_t>(k)] -= sign;
            }
            const double v = data_.rows[static_cast<std::size_t>(row)][f];
            const double v_next = data_.rows[static_cast<std::size_t>(rows[p + 1])][f];
            if (!(v_next > v)) continue;
            const double c = next_threshold(static_cast<int>(f), row);
            if (!(c > v && c <= v_next)) continue;
            const double r_left = sl / nl;
            const double r_right = (s.sum_w - sl) / (s.n_rows - nl);
            int limit = loss_ - 1;
            if (best.found) limit = std::min(limit, best.loss_count);
            const int cnt = count_errors(s.base, bl, br, r_left, r_right, data_.tie_tol, s.fixed, limit);
            if (cnt > limit) continue;
            if (better_zero_one(cnt, static_cast<int>(f), c, best)) {
                best = {true, slot, static_cast<int>(f), c, cnt, 0.0};
            }
        }
    }
}

SplitChoice TreeGrower::scan_variance(int slot) const {
    const Leaf& leaf = leaves_[static_cast<std::size_t>(slot)];
    SplitChoice best;
    if (leaf.count < 2) return best;
    const double mean = leaf.reward;
    double sse = 0.0;
    for (int r : leaf.sorted[0]) {
        const double y = data_.w[static_cast<std::size_t>(data_.row_traj[static_cast<std::size_t>(r)])] - mean;
        sse += y * y;
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const auto& rows = leaf.sorted[f];
        double sl = 0.0, ql = 0.0;
        double st = 0.0, qt = 0.0;
        for (int r : rows) {
            const double y = data_.w[static_cast<std::size_t>(data_.row_traj[static_cast<std::size_t>(r)])] - mean;
            st += y;
            qt += y * y;
        }
        for (std::size_t p = 0; p + 1 < rows.size(); ++p) {
            const int row = rows[p];
            const double y = data_.w[static_cast<std::size_t>(data_.row_traj[static_cast<std::size_t>(row)])] - mean;
            sl += y;
            ql += y * y;
            const double v = data_.rows[static_cast<std::size_t>(row)][f];
            const double v_next = data_.rows[static_cast<std::size_t>(rows[p + 1])][f];
            if (!(v_next > v)) continue;
            const double c = next_threshold(static_cast<int>(f), row);
            if (!(c > v && c <= v_next)) continue;
            const double nl = static_cast<double>(p + 1);
            const double nr = static_cast<double>(rows.size()) - nl;
            const double sr = st - sl, qr = qt - ql;
            const double children = (ql - sl * sl / nl) + (qr - sr * sr / nr);
            const double gain = sse - children;
            if (better_variance(gain, static_cast<int>(f), c, best)) {
                best = {true, slot, static_cast<int>(f), c, 0, gain};
            }
        }
    }
    return best;
}

SplitChoice TreeGrower::best_split() const {
    SplitChoice best;
    if (cfg_.split_criterion == SplitCriterion::ZeroOne) {
        for (int slot = 0; slot < num_leaves(); ++slot) scan_zero_one(slot, best);
        return best;
    }
    double root_scale = 0.0;
    for (std::size_t t = 0; t < data_.ids.size(); ++t) root_scale = std::max(root_scale, std::abs(data_.w[t]));
    const double eps = 1e-12 * std::max(1.0, root_scale * root_scale * static_cast<double>(data_.rows.size()));
    for (int slot = 0; slot < num_leaves(); ++slot) {
        const Leaf& leaf = leaves_[static_cast<std::size_t>(slot)];
        if (!leaf.variance_cached) {
            leaf.variance_best = scan_variance(slot);
            leaf.variance_cached = true;
        }
        const SplitChoice& cand = leaf.variance_best;
        if (!cand.found || !(cand.variance_gain > eps)) continue;
        if (better_variance(cand.variance_gain, cand.feature, cand.threshold, best)) best = cand;
    }
    return best;
}

void TreeGrower::apply(const SplitChoice& split) {
    if (!split.found) throw InductionError("apply called without a split");
    const auto slot = static_cast<std::size_t>(split.leaf);
    const auto f = static_cast<std::size_t>(split.feature);
    Leaf right;
    {
        Leaf& left = leaves_[slot];
        for (std::size_t g = 0; g < kNumFeatures; ++g) {
            std::vector<int> lo, hi;
            lo.reserve(left.sorted[g].size());
            for (int r : left.sorted[g]) {
                (data_.rows[static_cast<std::size_t>(r)][f] < split.threshold ? lo : hi).push_back(r);
            }
            left.sorted[g] = std::move(lo);
            right.sorted[g] = std::move(hi);
        }
        const int parent = left.node;
        const int ln = static_cast<int>(nodes_.size());
        const int rn = ln + 1;
        nodes_[static_cast<std::size_t>(parent)] = {split.feature, split.threshold, ln, rn, -1};
        nodes_.push_back({-1, 0.0, -1, -1, split.leaf});
        nodes_.push_back({-1, 0.0, -1, -1, num_leaves()});
        left.node = ln;
        right.node = rn;
        refresh_leaf(left);
        refresh_leaf(right);
    }
    leaves_.push_back(std::move(right));
    refresh_predictions();
}

std::vector<double> TreeGrower::candidate_thresholds(int leaf, int feature) const {
    const auto& rows = leaves_.at(static_cast<std::size_t>(leaf)).sorted.at(static_cast<std::size_t>(feature));
    std::vector<double> out;
    for (std::size_t p = 0; p + 1 < rows.size(); ++p) {
        const double v = data_.rows[static_cast<std::size_t>(rows[p])][static_cast<std::size_t>(feature)];
        const double v_next = data_.rows[static_cast<std::size_t>(rows[p + 1])][static_cast<std::size_t>(feature)];
        if (!(v_next > v)) continue;
        const double c = next_threshold(feature, rows[p]);
        if (c > v && c <= v_next) out.push_back(c);
    }
    return out;
}

int TreeGrower::split_loss_incremental(int leaf, int feature, double threshold) const {
    const Leaf& lf = leaves_.at(static_cast<std::size_t>(leaf));
    const ScanSetup s = make_setup(leaf);
    std::vector<double> bl(s.base.size(), 0.0), br = s.a;
    double sl = 0.0;
    int nl = 0;
    for (int row : lf.sorted[0]) {
        if (!(data_.rows[static_cast<std::size_t>(row)][static_cast<std::size_t>(feature)] < threshold)) continue;
        const int t = data_.row_traj[static_cast<std::size_t>(row)];
        sl += data_.w[static_cast<std::size_t>(t)];
        ++nl;
        const int pos = s.traj_pos[static_cast<std::size_t>(t)];
        for (int q = s.inc_offset[static_cast<std::size_t>(pos)]; q < s.inc_offset[static_cast<std::size_t>(pos) + 1]; ++q) {
            const auto& [k, sign] = s.inc[static_cast<std::size_t>(q)];
            bl[static_cast<std::size_t>(k)] += sign;
            br[static_cast<std::size_t>(k)] -= sign;
        }
    }
    if (nl == 0 || nl == s.n_rows) return -1;
    return count_errors(s.base, bl, br, sl / nl, (s.sum_w - sl) / (s.n_rows - nl), data_.tie_tol, s.fixed, INT_MAX);
}

int TreeGrower::split_loss_bruteforce(int leaf, int feature, double threshold) const {
    // Route every row through the explicit tree, then recompute all leaf
    // rewards and trajectory returns from scratch.
    const std::size_t n_leaves = leaves_.size() + 1;
    const std::size_t n_traj = data_.ids.size();
    std::vector<double> sum(n_leaves, 0.0);
    std::vector<int> cnt(n_leaves, 0);
    std::vector<int> row_leaf(data_.rows.size());
    for (std::size_t r = 0; r < data_.rows.size(); ++r) {
        int nd = 0;
        while (nodes_[static_cast<std::size_t>(nd)].feature >= 0) {
            const Node& n = nodes_[static_cast<std::size_t>(nd)];
            nd = data_.rows[r][static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        int l = nodes_[static_cast<std::size_t>(nd)].slot;
        if (l == leaf && !(data_.rows[r][static_cast<std::size_t>(feature)] < threshold)) {
            l = static_cast<int>(n_leaves - 1);
        }
        row_leaf[r] = l;
        sum[static_cast<std::size_t>(l)] += data_.w[static_cast<std::size_t>(data_.row_traj[r])];
        ++cnt[static_cast<std::size_t>(l)];
    }
    if (cnt[static_cast<std::size_t>(leaf)] == 0 || cnt[n_leaves - 1] == 0) return -1;
    std::vector<int> visits(n_traj * n_leaves, 0);
    for (std::size_t r = 0; r < data_.rows.size(); ++r) {
        ++visits[static_cast<std::size_t>(data_.row_traj[r]) * n_leaves + static_cast<std::size_t>(row_leaf[r])];
    }
    std::vector<double> ret(n_traj, 0.0);
    for (std::size_t t = 0; t < n_traj; ++t) {
        for (std::size_t l = 0; l < n_leaves; ++l) {
            const int v = visits[t * n_leaves + l];
            if (v) ret[t] += v * (sum[l] / cnt[l]);
        }
    }
    int errors = 0;
    for (const auto& [i, j] : data_.edges) {
        errors += mispredicted(ret[static_cast<std::size_t>(i)], ret[static_cast<std::size_t>(j)], data_.tie_tol);
    }
    return errors;
}

RewardTree TreeGrower::export_tree() const {
    std::vector<TreeNode> out(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const Node& n = nodes_[k];
        TreeNode& t = out[k];
        if (n.feature >= 0) {
            t.feature = n.feature;
            t.threshold = n.threshold;
            t.left = n.left;
            t.right = n.right;
        } else {
            const Leaf& leaf = leaves_[static_cast<std::size_t>(n.slot)];
            t.reward = leaf.reward;
            for (const auto& [lt, c] : leaf.traj_counts) t.support.emplace_back(data_.ids[static_cast<std::size_t>(lt)], c);
        }
    }
    return RewardTree::from_nodes(std::move(out));
}

GrowthResult TreeGrower::run() {
    GrowthResult res;
    res.loss_history.push_back(loss_);
    while (num_leaves() < cfg_.max_leaves) {
        const SplitChoice s = best_split();
        if (!s.found) break;
        apply(s);
        res.loss_history.push_back(loss_);
    }
    res.tree = export_tree();
    return res;
}

}  // namespace detail

GrowthResult grow(const PreferenceGraph& graph, const ReturnEstimates& returns, const InductionConfig& cfg) {
    cfg.validate();
    const auto data = detail::InductionData::from_graph(graph, returns);
    detail::TreeGrower grower(data, cfg);
    return grower.run();
}

namespace {

// Mutable working copy of a tree for pruning: per-leaf supports and rewards
// keyed by node index.
struct PruneState {
    std::vector<TreeNode> nodes;
};

std::vector<double> support_returns(const RewardTree& tree, std::size_t n_traj) {
    std::vector<double> g(n_traj, 0.0);
    for (int l = 0; l < tree.num_leaves(); ++l) {
        const TreeNode& leaf = tree.leaf(l);
        for (const auto& [id, c] : leaf.support) g[static_cast<std::size_t>(id)] += c * leaf.reward;
    }
    return g;
}

int count_loss(const PreferenceGraph& graph, const std::vector<double>& g, double tol) {
    int n = 0;
    for (const auto& e : graph.edges()) {
        n += mispredicted(g[static_cast<std::size_t>(e.i)], g[static_cast<std::size_t>(e.j)], tol);
    }
    return n;
}

std::vector<std::pair<int, int>> merge_support(const std::vector<std::pair<int, int>>& a,
                                               const std::vector<std::pair<int, int>>& b) {
    std::vector<std::pair<int, int>> out;
    std::size_t p = 0, q = 0;
    while (p < a.size() || q < b.size()) {
        if (q == b.size() || (p < a.size() && a[p].first < b[q].first)) {
            out.push_back(a[p++]);
        } else if (p == a.size() || b[q].first < a[p].first) {
            out.push_back(b[q++]);
        } else {
            out.emplace_back(a[p].first, a[p].second + b[q].second);
            ++p;
            ++q;
        }
    }
    return out;
}

double eq5_reward(const std::vector<std::pair<int, int>>& support, const PreferenceGraph& graph,
                  const ReturnEstimates& returns) {
    double num = 0.0;
    int den = 0;
    for (const auto& [id, c] : support) {
        num += returns.g[static_cast<std::size_t>(id)] / graph.trajectory(id).length() * c;
        den += c;
    }
    if (den == 0) throw InductionError("collapsed leaf has no timesteps");
    return num / den;
}

RewardTree collapse(const RewardTree& tree, int node, const PreferenceGraph& graph, const ReturnEstimates& returns) {
    const auto src = tree.nodes();
    const TreeNode& parent = src[static_cast<std::size_t>(node)];
    const int a = parent.left, b = parent.right;
    std::vector<int> remap(src.size(), -1);
    std::vector<TreeNode> out;
    for (std::size_t k = 0; k < src.size(); ++k) {
        if (static_cast<int>(k) == a || static_cast<int>(k) == b) continue;
        remap[k] = static_cast<int>(out.size());
        out.push_back(src[k]);
    }
    for (auto& n : out) {
        if (!n.is_leaf()) {
            n.left = remap[static_cast<std::size_t>(n.left)];
            n.right = remap[static_cast<std::size_t>(n.right)];
        }
    }
    TreeNode& merged = out[static_cast<std::size_t>(remap[static_cast<std::size_t>(node)])];
    merged.feature = -1;
    merged.threshold = 0.0;
    merged.left = merged.right = -1;
    merged.support = merge_support(src[static_cast<std::size_t>(a)].support, src[static_cast<std::size_t>(b)].support);
    merged.reward = eq5_reward(merged.support, graph, returns);
    return RewardTree::from_nodes(std::move(out));
}

}  // namespace

std::vector<PruningStep> pruning_sequence(const RewardTree& tree, const PreferenceGraph& graph,
                                          const ReturnEstimates& returns, double tie_tol) {
    const auto n_traj = static_cast<std::size_t>(graph.num_trajectories());
    std::vector<std::vector<int>> incident(n_traj);
    for (std::size_t e = 0; e < graph.edges().size(); ++e) {
        incident[static_cast<std::size_t>(graph.edges()[e].i)].push_back(static_cast<int>(e));
        incident[static_cast<std::size_t>(graph.edges()[e].j)].push_back(static_cast<int>(e));
    }
    std::vector<PruningStep> seq;
    std::vector<double> g = support_returns(tree, n_traj);
    seq.push_back({tree, count_loss(graph, g, tie_tol)});
    std::vector<double> trial(n_traj);
    std::vector<int> stamp(graph.edges().size(), -1);
    int stamp_id = 0;
    while (seq.back().tree.num_leaves() > 1) {
        const RewardTree& cur = seq.back().tree;
        const int cur_loss = seq.back().loss_count;
        g = support_returns(cur, n_traj);
        trial = g;
        int best_node = -1;
        int best_loss = INT_MAX;
        const auto nodes = cur.nodes();
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const TreeNode& n = nodes[k];
            if (n.is_leaf()) continue;
            const TreeNode& la = nodes[static_cast<std::size_t>(n.left)];
            const TreeNode& lb = nodes[static_cast<std::size_t>(n.right)];
            if (!la.is_leaf() || !lb.is_leaf()) continue;
            const auto merged = merge_support(la.support, lb.support);
            const double rm = eq5_reward(merged, graph, returns);
            for (const auto& [id, c] : la.support) trial[static_cast<std::size_t>(id)] -= c * la.reward;
            for (const auto& [id, c] : lb.support) trial[static_cast<std::size_t>(id)] -= c * lb.reward;
            for (const auto& [id, c] : merged) trial[static_cast<std::size_t>(id)] += c * rm;
            int loss = cur_loss;
            ++stamp_id;
            for (const auto& [id, c] : merged) {
                for (int e : incident[static_cast<std::size_t>(id)]) {
                    if (stamp[static_cast<std::size_t>(e)] == stamp_id) continue;
                    stamp[static_cast<std::size_t>(e)] = stamp_id;
                    const auto& edge = graph.edges()[static_cast<std::size_t>(e)];
                    const auto i = static_cast<std::size_t>(edge.i), j = static_cast<std::size_t>(edge.j);
                    loss -= mispredicted(g[i], g[j], tie_tol);
                    loss += mispredicted(trial[i], trial[j], tie_tol);
                }
            }
            for (const auto& [id, c] : merged) trial[static_cast<std::size_t>(id)] = g[static_cast<std::size_t>(id)];
            if (loss < best_loss) {
                best_loss = loss;
                best_node = static_cast<int>(k);
            }
        }
        RewardTree next = collapse(cur, best_node, graph, returns);
        const int loss = count_loss(graph, support_returns(next, n_traj), tie_tol);
        seq.push_back({std::move(next), loss});
    }
    return seq;
}

RewardTree prune(const RewardTree& tree, const PreferenceGraph& graph, const ReturnEstimates& returns,
                 const InductionConfig& cfg) {
    const auto seq = pruning_sequence(tree, graph, returns, tie_tolerance(returns.g));
    const double k = std::max(1, graph.num_edges());
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < seq.size(); ++s) {
        const double score = seq[s].loss_count / k + cfg.alpha * seq[s].tree.num_leaves();
        // Later entries are smaller, so ties move toward them.
        if (score <= best_score + 1e-12) {
            if (score < best_score - 1e-12 || seq[s].tree.num_leaves() < seq[best].tree.num_leaves()) best = s;
            best_score = std::min(best_score, score);
        }
    }
    return seq[best].tree;
}

InductionResult induce(const PreferenceGraph& graph, const InductionConfig& cfg) {
    cfg.validate();
    InductionResult res;
    res.returns = estimate_returns(graph, cfg);
    GrowthResult grown = grow(graph, res.returns, cfg);
    res.growth_loss_history = std::move(grown.loss_history);
    res.grown_leaves = grown.tree.num_leaves();
    res.tree = prune(grown.tree, graph, res.returns, cfg);
    res.loss = loss_0_1(graph, predicted_returns(res.tree, graph), tie_tolerance(res.returns.g));
    return res;
}

}  // namespace jetpref
