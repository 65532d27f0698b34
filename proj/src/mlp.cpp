#include "jetpref/mlp.hpp"

#include "jetpref/error.hpp"
#include "jetpref/prefgraph.hpp"

#include <cmath>
#include <random>

namespace jetpref {

MLP::MLP(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw InputError("MLP needs at least an input and an output layer");
    Eigen::Index total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw InputError("MLP layer sizes must be positive");
        offsets_.push_back(total);
        total += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(total);
}

MLP MLP::random(std::vector<int> sizes, std::uint64_t seed) {
    MLP net(std::move(sizes));
    std::mt19937_64 rng(seed);
    for (int l = 0; l < net.num_layers(); ++l) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / net.sizes_[static_cast<std::size_t>(l)]));
        auto w = net.weight(l);
        for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = normal(rng);
    }
    return net;
}

Eigen::Map<const Eigen::MatrixXd> MLP::weight(int layer) const {
    const auto l = static_cast<std::size_t>(layer);
    return {params_.data() + offsets_.at(l), sizes_[l + 1], sizes_[l]};
}

Eigen::Map<const Eigen::VectorXd> MLP::bias(int layer) const {
    const auto l = static_cast<std::size_t>(layer);
    return {params_.data() + offsets_.at(l) + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

Eigen::Map<Eigen::MatrixXd> MLP::weight(int layer) {
    const auto l = static_cast<std::size_t>(layer);
    return {params_.data() + offsets_.at(l), sizes_[l + 1], sizes_[l]};
}

Eigen::Map<Eigen::VectorXd> MLP::bias(int layer) {
    const auto l = static_cast<std::size_t>(layer);
    return {params_.data() + offsets_.at(l) + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

namespace {

void leaky_relu(Eigen::MatrixXd& z) {
    z = z.array().max(kLeakySlope * z.array());
}

}  // namespace

Eigen::VectorXd MLP::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != input_dim()) throw InputError("MLP input has the wrong dimension");
    return forward(x);
}

Eigen::MatrixXd MLP::forward(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    if (x.rows() != input_dim()) throw InputError("MLP input has the wrong dimension");
    Eigen::MatrixXd h = x;
    for (int l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd z = weight(l) * h;
        z.colwise() += bias(l);
        if (l + 1 < num_layers()) leaky_relu(z);
        h = std::move(z);
    }
    return h;
}

void MLP::backward(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& d_out,
                   Eigen::Ref<Eigen::VectorXd> grad) const {
    if (x.rows() != input_dim() || d_out.rows() != output_dim() || d_out.cols() != x.cols()) {
        throw InputError("MLP backward: dimension mismatch");
    }
    if (grad.size() != num_params()) throw InputError("MLP backward: gradient has the wrong size");
    // Keep pre-activations so the leaky-ReLU derivative can be taken.
    std::vector<Eigen::MatrixXd> inputs{x};
    std::vector<Eigen::MatrixXd> pre;
    for (int l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd z = weight(l) * inputs.back();
        z.colwise() += bias(l);
        pre.push_back(z);
        if (l + 1 < num_layers()) {
            leaky_relu(z);
            inputs.push_back(std::move(z));
        }
    }
    Eigen::MatrixXd delta = d_out;
    for (int l = num_layers() - 1; l >= 0; --l) {
        const auto ls = static_cast<std::size_t>(l);
        if (l + 1 < num_layers()) {
            delta.array() *= (pre[ls].array() > 0.0).cast<double>() * (1.0 - kLeakySlope) + kLeakySlope;
        }
        const Eigen::Index w_size = static_cast<Eigen::Index>(sizes_[ls]) * sizes_[ls + 1];
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets_[ls], sizes_[ls + 1], sizes_[ls]);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[ls] + w_size, sizes_[ls + 1]);
        gw.noalias() += delta * inputs[ls].transpose();
        gb += delta.rowwise().sum();
        if (l > 0) delta = weight(l).transpose() * delta;
    }
}

Json MLP::to_json() const {
    return Json{{"sizes", sizes_}, {"params", std::vector<double>(params_.data(), params_.data() + params_.size())}};
}

MLP MLP::from_json(const Json& j) {
    MLP net(j.at("sizes").get<std::vector<int>>());
    const auto p = j.at("params").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(p.size()) != net.num_params()) throw InputError("MLP parameter count mismatch");
    net.params_ = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    return net;
}

double mse_loss(const MLP& net, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& target, Eigen::Ref<Eigen::VectorXd> grad) {
    const Eigen::MatrixXd diff = net.forward(x) - target;
    const double n = static_cast<double>(x.cols());
    grad.setZero();
    net.backward(x, (2.0 / n) * diff, grad);
    return diff.squaredNorm() / n;
}

double preference_nll_loss(const MLP& net, const Eigen::Ref<const Eigen::MatrixXd>& x,
                           std::span<const std::pair<int, int>> segments, std::span<const std::pair<int, int>> edges,
                           Eigen::Ref<Eigen::VectorXd> grad) {
    if (net.output_dim() != 1) throw InputError("preference loss needs a scalar network");
    if (edges.empty()) throw TrainingError("preference loss over an empty batch");
    const Eigen::MatrixXd out = net.forward(x);
    std::vector<double> g(segments.size(), 0.0);
    for (std::size_t k = 0; k < segments.size(); ++k) {
        g[k] = out.block(0, segments[k].first, 1, segments[k].second).sum();
    }
    const double n = static_cast<double>(edges.size());
    std::vector<double> dg(segments.size(), 0.0);
    double loss = 0.0;
    for (const auto& [i, j] : edges) {
        const double z = g[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(j)];
        loss += softplus(z);
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        dg[static_cast<std::size_t>(i)] += s / n;
        dg[static_cast<std::size_t>(j)] -= s / n;
    }
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(1, x.cols());
    for (std::size_t k = 0; k < segments.size(); ++k) {
        d_out.block(0, segments[k].first, 1, segments[k].second).setConstant(dg[k]);
    }
    grad.setZero();
    net.backward(x, d_out, grad);
    return loss / n;
}

Standardizer Standardizer::fit(const Eigen::Ref<const Eigen::MatrixXd>& columns, double min_scale) {
    if (columns.cols() == 0) throw InputError("cannot fit a standardizer to no data");
    Standardizer s;
    s.mean = columns.rowwise().mean();
    const Eigen::MatrixXd centered = columns.colwise() - s.mean;
    s.scale = (centered.array().square().rowwise().sum() / static_cast<double>(columns.cols())).sqrt().max(min_scale);
    return s;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::Ref<const Eigen::MatrixXd>& columns) const {
    return (columns.colwise() - mean).array().colwise() / scale.array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::Ref<const Eigen::MatrixXd>& columns) const {
    Eigen::MatrixXd out = columns.array().colwise() * scale.array();
    out.colwise() += mean;
    return out;
}

Json Standardizer::to_json() const {
    return Json{{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const Json& j) {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("scale").get<std::vector<double>>();
    if (m.size() != s.size()) throw InputError("standardizer mean/scale size mismatch");
    Standardizer out;
    out.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    out.scale = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return out;
}

}  // namespace jetpref
