#include "jetpref/oracles.hpp"

#include "jetpref/error.hpp"

#include <cmath>
#include <string>

namespace jetpref {

void OracleConfig::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("oracle.beta must be >= 0");
    if (!(recency_discount > 0.0 && recency_discount <= 1.0)) {
        throw ConfigError("oracle.recency_discount must be in (0, 1]");
    }
}

namespace {

double indicator(bool b) { return b ? 1.0 : 0.0; }

}  // namespace

double oracle_reward(Task task, const FeatureVector& x) {
    switch (task) {
        case Task::Follow:
            return -(x[kDist] + 0.05 * x[kClosingSpeed] + 10.0 * x[kUpError]);
        case Task::Chase:
            return -(std::abs(x[kDist] - 20.0) + 10.0 * x[kLosError] + 5.0 * x[kAbsRoll] +
                     100.0 * indicator(x[kAlt] < 50.0));
        case Task::Land:
            // "delta alt" is measured as delta alt error; RJ sits at zero altitude.
            return -(0.05 * x[kAbsLrOffset] + 0.05 * x[kAlt] + x[kHdgError] + x[kAbsRoll] +
                     0.5 * x[kPitchError] + 0.25 * (x[kYawRate] + x[kRollRate] + x[kPitchRate]) +
                     0.1 * x[kGForce] + 0.025 * x[kThrust] + 0.05 * x[kDeltaThrust] +
                     indicator(x[kDeltaDistHor] > 0.0) + 2.0 * indicator(x[kDeltaAltError] > 0.0) +
                     indicator(x[kAbsLrOffset] > 10.0) + 10.0 * indicator(x[kAlt] < 0.6));
    }
    return 0.0;
}

double discounted_return(std::span<const double> rewards, double recency_discount) {
    if (rewards.empty()) throw InputError("return of an empty trajectory");
    double g = 0.0;
    double w = 1.0;
    for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) {
        g += w * *it;
        w *= recency_discount;
    }
    return g;
}

double oracle_return(const Trajectory& traj, const OracleConfig& cfg) {
    std::vector<double> r;
    r.reserve(traj.transitions.size());
    for (const auto& tr : traj.transitions) r.push_back(oracle_reward(cfg.task, tr.x));
    return discounted_return(r, cfg.recency_discount);
}

double preference_probability(double g_first, double g_second, double beta) {
    // 1 / (1 + exp((g_first - g_second) / beta)), written to avoid overflow.
    const double z = (g_first - g_second) / beta;
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

PreferenceOracle::PreferenceOracle(OracleConfig cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

PreferenceOutcome PreferenceOracle::prefer(const Trajectory& first, const Trajectory& second) {
    return prefer_returns(oracle_return(first, cfg_), oracle_return(second, cfg_));
}

PreferenceOutcome PreferenceOracle::prefer_returns(double g_first, double g_second) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (cfg_.beta == 0.0) {
        if (g_second > g_first) return PreferenceOutcome::SecondPreferred;
        if (g_first > g_second) return PreferenceOutcome::FirstPreferred;
        return unit(rng_) < 0.5 ? PreferenceOutcome::SecondPreferred : PreferenceOutcome::FirstPreferred;
    }
    const double p_second = preference_probability(g_first, g_second, cfg_.beta);
    return unit(rng_) < p_second ? PreferenceOutcome::SecondPreferred : PreferenceOutcome::FirstPreferred;
}

double expected_error_rate(double beta, std::span<const std::pair<double, double>> reference_pairs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [a, b] : reference_pairs) {
        const double gap = std::abs(a - b);
        if (gap == 0.0) continue;
        // Probability of preferring the lower-return trajectory.
        sum += preference_probability(0.0, -gap, beta);
        ++n;
    }
    if (n == 0) throw CalibrationError("calibration needs at least one untied return pair");
    return sum / static_cast<double>(n);
}

double calibrate_beta(double target_error_rate, std::span<const std::pair<double, double>> reference_pairs) {
    if (!(target_error_rate > 0.0 && target_error_rate < 0.5)) {
        throw CalibrationError("target error rate must lie in (0, 0.5)");
    }
    double lo = std::log(1e-6), hi = std::log(1e6);
    const double err_lo = expected_error_rate(std::exp(lo), reference_pairs);
    const double err_hi = expected_error_rate(std::exp(hi), reference_pairs);
    if (target_error_rate < err_lo - 1e-3 || target_error_rate > err_hi + 1e-3) {
        throw CalibrationError("target error rate " + std::to_string(target_error_rate) +
                               " unattainable for beta in [1e-6, 1e6]");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (expected_error_rate(std::exp(mid), reference_pairs) < target_error_rate) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::exp(0.5 * (lo + hi));
}

}  // namespace jetpref
