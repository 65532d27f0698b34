#include "jetpref/adam.hpp"
#include "jetpref/error.hpp"
#include "jetpref/rewardtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jetpref {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

double return_loss(std::span<const std::pair<int, int>> edges, std::span<const double> g) {
    double total = 0.0;
    for (const auto& [i, j] : edges) total += softplus(g[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(j)]);
    return total;
}

void return_loss_gradient(std::span<const std::pair<int, int>> edges, std::span<const double> g,
                          std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& [i, j] : edges) {
        const double s = sigmoid(g[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(j)]);
        grad[static_cast<std::size_t>(i)] += s;
        grad[static_cast<std::size_t>(j)] -= s;
    }
}

void normalize_returns(std::span<double> g, std::span<const int> lengths) {
    if (g.empty()) return;
    const double n = static_cast<double>(g.size());
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / n;
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    const double mean_length = std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
    double scale_ref = 1.0;
    for (double v : g) scale_ref = std::max(scale_ref, std::abs(v));
    if (!(sd > 1e-12 * scale_ref)) {
        std::fill(g.begin(), g.end(), 0.0);
        return;
    }
    const double scale = mean_length / sd;
    for (double& v : g) v = (v - mean) * scale;
    const double lo = *std::min_element(g.begin(), g.end());
    for (double& v : g) v -= lo;
}

ReturnEstimates estimate_returns(const PreferenceGraph& graph, const InductionConfig& cfg) {
    if (graph.num_edges() == 0) throw InductionError("return estimation needs at least one preference");
    const auto n_all = static_cast<std::size_t>(graph.num_trajectories());
    ReturnEstimates out;
    out.g.assign(n_all, 0.0);
    out.participating.assign(n_all, 0);
    for (const auto& e : graph.edges()) {
        out.participating[static_cast<std::size_t>(e.i)] = 1;
        out.participating[static_cast<std::size_t>(e.j)] = 1;
    }
    std::vector<int> local(n_all, -1);
    std::vector<int> ids;
    std::vector<int> lengths;
    for (std::size_t id = 0; id < n_all; ++id) {
        if (!out.participating[id]) continue;
        local[id] = static_cast<int>(ids.size());
        ids.push_back(static_cast<int>(id));
        lengths.push_back(graph.trajectory(static_cast<int>(id)).length());
    }
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(graph.num_edges()));
    for (const auto& e : graph.edges()) {
        edges.emplace_back(local[static_cast<std::size_t>(e.i)], local[static_cast<std::size_t>(e.j)]);
    }
    // Canonical order: the estimate must not depend on label arrival order.
    std::sort(edges.begin(), edges.end());

    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad(n);
    AdamState adam(n, cfg.adam_learning_rate);
    std::span<const double> gv(g.data(), static_cast<std::size_t>(n));
    double prev = return_loss(edges, gv);
    int steps = 0;
    while (steps < cfg.max_adam_steps) {
        return_loss_gradient(edges, gv, std::span<double>(grad.data(), static_cast<std::size_t>(n)));
        adam.apply(g, grad);
        ++steps;
        const double cur = return_loss(edges, gv);
        if (std::abs(cur - prev) < cfg.convergence_threshold) break;
        prev = cur;
    }

    std::vector<double> gl(g.data(), g.data() + n);
    normalize_returns(gl, lengths);
    for (std::size_t k = 0; k < ids.size(); ++k) out.g[static_cast<std::size_t>(ids[k])] = gl[k];
    out.adam_steps = steps;
    return out;
}

}  // namespace jetpref
