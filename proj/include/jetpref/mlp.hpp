#pragma once

#include "jetpref/serialization.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace jetpref {

inline constexpr double kLeakySlope = 0.01;

/// Fully-connected network with leaky-ReLU hidden layers and a linear output.
/// Parameters live in one flat vector: per layer, W (out x in, column-major)
/// followed by b.
class MLP {
public:
    MLP() = default;
    /// Zero-initialized; sizes = {input, hidden..., output}.
    explicit MLP(std::vector<int> sizes);
    /// He-normal weights, zero biases.
    static MLP random(std::vector<int> sizes, std::uint64_t seed);

    const std::vector<int>& sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
    Eigen::Index num_params() const { return params_.size(); }

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }

    Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(int layer);
    Eigen::Map<Eigen::VectorXd> bias(int layer);

    /// Throws InputError on a dimension mismatch.
    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Columns are samples.
    Eigen::MatrixXd forward(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
    /// Adds dL/dparams to grad given dL/doutput for each column of x.
    void backward(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& d_out,
                  Eigen::Ref<Eigen::VectorXd> grad) const;

    Json to_json() const;
    static MLP from_json(const Json& j);

    bool operator==(const MLP& other) const { return sizes_ == other.sizes_ && params_ == other.params_; }

private:
    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;  // start of W for each layer
    Eigen::VectorXd params_;
};

/// Mean over columns of the squared error summed over output dimensions.
/// Gradient is written into grad (overwritten).
double mse_loss(const MLP& net, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& target, Eigen::Ref<Eigen::VectorXd> grad);

/// Preference NLL over trajectory returns. x holds every transition column;
/// segments[k] = (first column, count) of trajectory k; edges are (i, j) over
/// segment indices with j preferred. Loss is the mean over edges of
/// softplus(G_i - G_j), where G sums the network's scalar outputs.
double preference_nll_loss(const MLP& net, const Eigen::Ref<const Eigen::MatrixXd>& x,
                           std::span<const std::pair<int, int>> segments, std::span<const std::pair<int, int>> edges,
                           Eigen::Ref<Eigen::VectorXd> grad);

/// Per-dimension mean and standard deviation (floored) used to standardize inputs.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const Eigen::Ref<const Eigen::MatrixXd>& columns, double min_scale = 1e-6);
    static Standardizer identity(Eigen::Index dim);
    Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& columns) const;
    Eigen::MatrixXd invert(const Eigen::Ref<const Eigen::MatrixXd>& columns) const;

    Json to_json() const;
    static Standardizer from_json(const Json& j);

    bool operator==(const Standardizer& other) const { return mean == other.mean && scale == other.scale; }
};

}  // namespace jetpref
