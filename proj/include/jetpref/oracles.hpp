#pragma once

#include "jetpref/features.hpp"
#include "jetpref/trajectory.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace jetpref {

struct OracleConfig {
    Task task = Task::Follow;
    double beta = 0.0;              // Bradley-Terry temperature; 0 = deterministic
    double recency_discount = 1.0;  // myopia; 1 = unbiased
    std::uint64_t seed = 0;

    /// Throws ConfigError when beta < 0 or recency_discount is outside (0, 1].
    void validate() const;
};

/// Ground-truth transition reward of the task.
double oracle_reward(Task task, const FeatureVector& x);

/// Sum of w_t R(x_t) with w_t = recency_discount^(T - t). Throws InputError on
/// an empty sequence.
double discounted_return(std::span<const double> rewards, double recency_discount);
double oracle_return(const Trajectory& traj, const OracleConfig& cfg);

/// P(second preferred over first) for returns (g_first, g_second) at temperature beta > 0.
double preference_probability(double g_first, double g_second, double beta);

enum class PreferenceOutcome { FirstPreferred, SecondPreferred };

/// Synthetic evaluator. Owns its sampling/tie-break generator.
class PreferenceOracle {
public:
    explicit PreferenceOracle(OracleConfig cfg);

    const OracleConfig& config() const { return cfg_; }

    PreferenceOutcome prefer(const Trajectory& first, const Trajectory& second);
    /// Same decision rule applied to precomputed returns.
    PreferenceOutcome prefer_returns(double g_first, double g_second);

private:
    OracleConfig cfg_;
    std::mt19937_64 rng_;
};

/// Beta whose expected disagreement with the return ordering over the pairs
/// equals target (within 1e-3). Tied pairs are ignored. Throws CalibrationError.
double calibrate_beta(double target_error_rate, std::span<const std::pair<double, double>> reference_pairs);
/// Expected disagreement rate at beta over the untied pairs.
double expected_error_rate(double beta, std::span<const std::pair<double, double>> reference_pairs);

}  // namespace jetpref
