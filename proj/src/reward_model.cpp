#include "jetpref/reward_model.hpp"

#include "jetpref/error.hpp"
#include "jetpref/oracles.hpp"

namespace jetpref {

void RewardModel::reward_batch(std::span<const FeatureVector> xs, std::span<double> out) const {
    if (xs.size() != out.size()) throw InputError("reward_batch: size mismatch");
    for (std::size_t k = 0; k < xs.size(); ++k) out[k] = reward(xs[k]);
}

double OracleReward::reward(const FeatureVector& x) const { return oracle_reward(task_, x); }

double model_return(const RewardModel& model, const Trajectory& traj) {
    double g = 0.0;
    for (const auto& tr : traj.transitions) g += model.reward(tr.x);
    return g;
}

}  // namespace jetpref
