#pragma once

#include <Eigen/Core>

#include <cmath>

namespace jetpref {

/// Adam over one flat parameter vector. beta1/beta2/epsilon are the usual
/// defaults; only the learning rate is tuned by callers.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    AdamState(Eigen::Index size, double lr)
        : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)), learning_rate(lr) {}

    void apply(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad) {
        ++step;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        params.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
    }
};

}  // namespace jetpref
