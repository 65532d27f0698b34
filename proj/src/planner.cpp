#include "jetpref/planner.hpp"

#include "jetpref/error.hpp"
#include "jetpref/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace jetpref {

std::string_view dynamics_mode_name(DynamicsMode m) {
    return m == DynamicsMode::TrueSimulator ? "true-simulator" : "learned-ensemble";
}

DynamicsMode parse_dynamics_mode(std::string_view name) {
    if (name == "true-simulator") return DynamicsMode::TrueSimulator;
    if (name == "learned-ensemble") return DynamicsMode::LearnedEnsemble;
    throw ConfigError("unknown planner model '" + std::string(name) + "' (expected true-simulator or learned-ensemble)");
}

void PlannerConfig::validate() const {
    if (horizon < 1) throw ConfigError("planner.horizon must be >= 1");
    if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("planner.discount must be in (0, 1]");
    if (iterations < 1) throw ConfigError("planner.iterations must be >= 1");
    if (candidates < 1) throw ConfigError("planner.candidates must be >= 1");
    if (elites < 1 || elites > candidates) throw ConfigError("planner.elites must be in [1, planner.candidates]");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("planner.learning_rate must be in (0, 1]");
    if (!(initial_std > 0.0)) throw ConfigError("planner.initial_std must be > 0");
}

CemResult cem_optimize(const CemScoreFn& score, const Eigen::Ref<const Eigen::VectorXd>& lo,
                       const Eigen::Ref<const Eigen::VectorXd>& hi, const Eigen::Ref<const Eigen::MatrixXd>& init_mean,
                       const Eigen::Ref<const Eigen::MatrixXd>& init_std, const PlannerConfig& cfg,
                       std::uint64_t seed) {
    cfg.validate();
    const Eigen::Index dim = init_mean.rows();
    const Eigen::Index h = init_mean.cols();
    if (lo.size() != dim || hi.size() != dim || init_std.rows() != dim || init_std.cols() != h) {
        throw InputError("cem_optimize: inconsistent dimensions");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd mean = init_mean;
    Eigen::MatrixXd var = init_std.array().square();
    const auto n = static_cast<std::size_t>(cfg.candidates);
    std::vector<Eigen::MatrixXd> cands(n, Eigen::MatrixXd(dim, h));
    std::vector<double> scores(n);
    std::vector<std::size_t> order(n);
    CemResult res;
    for (int it = 0; it < cfg.iterations; ++it) {
        const Eigen::MatrixXd sd = var.array().sqrt();
        for (auto& c : cands) {
            for (Eigen::Index t = 0; t < h; ++t) {
                for (Eigen::Index d = 0; d < dim; ++d) {
                    c(d, t) = std::clamp(mean(d, t) + sd(d, t) * normal(rng), lo(d), hi(d));
                }
            }
        }
        score(cands, scores);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        const auto ne = static_cast<std::size_t>(cfg.elites);
        Eigen::MatrixXd e_mean = Eigen::MatrixXd::Zero(dim, h);
        double e_score = 0.0;
        for (std::size_t k = 0; k < ne; ++k) {
            e_mean += cands[order[k]];
            e_score += scores[order[k]];
        }
        e_mean /= static_cast<double>(ne);
        Eigen::MatrixXd e_var = Eigen::MatrixXd::Zero(dim, h);
        for (std::size_t k = 0; k < ne; ++k) e_var.array() += (cands[order[k]] - e_mean).array().square();
        e_var /= static_cast<double>(ne);
        mean = (1.0 - cfg.learning_rate) * mean + cfg.learning_rate * e_mean;
        var = (1.0 - cfg.learning_rate) * var + cfg.learning_rate * e_var;
        res.elite_mean_scores.push_back(e_score / static_cast<double>(ne));
    }
    for (Eigen::Index t = 0; t < h; ++t) {
        for (Eigen::Index d = 0; d < dim; ++d) mean(d, t) = std::clamp(mean(d, t), lo(d), hi(d));
    }
    res.mean = std::move(mean);
    return res;
}

void SimulatorDynamics::step_batch(int member, std::span<const WorldState> s, std::span<const Action> a,
                                   std::span<WorldState> out) const {
    if (member != 0) throw InputError("simulator dynamics has a single member");
    if (s.size() != a.size() || s.size() != out.size()) throw InputError("step_batch: size mismatch");
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = advance(s[k], a[k]);
}

std::vector<double> score_sequences(const WorldState& s, std::span<const std::vector<Action>> sequences,
                                    const RewardModel& reward, const PlanningDynamics& dynamics, double discount) {
    const std::size_t n = sequences.size();
    std::vector<double> total(n, 0.0);
    if (n == 0) return total;
    const std::size_t horizon = sequences.front().size();
    for (const auto& seq : sequences) {
        if (seq.size() != horizon) throw InputError("score_sequences: sequences differ in length");
    }
    std::vector<WorldState> cur(n), next(n);
    std::vector<Action> actions(n);
    std::vector<char> alive(n);
    std::vector<FeatureVector> xs;
    std::vector<std::size_t> which;
    std::vector<double> r;
    for (int m = 0; m < dynamics.members(); ++m) {
        std::fill(cur.begin(), cur.end(), s);
        std::fill(alive.begin(), alive.end(), 1);
        double w = 1.0;
        for (std::size_t h = 0; h < horizon; ++h) {
            for (std::size_t k = 0; k < n; ++k) actions[k] = sequences[k][h];
            dynamics.step_batch(m, cur, actions, next);
            xs.clear();
            which.clear();
            for (std::size_t k = 0; k < n; ++k) {
                if (!alive[k]) continue;
                xs.push_back(phi(cur[k], actions[k], next[k]));
                which.push_back(k);
            }
            if (xs.empty()) break;
            r.resize(xs.size());
            reward.reward_batch(xs, r);
            for (std::size_t q = 0; q < which.size(); ++q) {
                if (!std::isfinite(r[q])) throw PlanningError("reward model returned a non-finite value");
                total[which[q]] += w * r[q];
                if (passed_threshold(next[which[q]])) alive[which[q]] = 0;
            }
            w *= discount;
            std::swap(cur, next);
        }
    }
    for (double& v : total) v /= dynamics.members();
    return total;
}

namespace {

Action column_action(const Eigen::MatrixXd& m, Eigen::Index t) { return {m(0, t), m(1, t), m(2, t), m(3, t)}; }

}  // namespace

std::vector<Action> cem_plan(const WorldState& s, const RewardModel& reward, const PlannerConfig& cfg,
                             const PlanningDynamics& dynamics) {
    cfg.validate();
    const Eigen::Vector4d lo(-1.0, -1.0, -1.0, 0.0);
    const Eigen::Vector4d hi(1.0, 1.0, 1.0, 1.0);
    Eigen::MatrixXd mean(4, cfg.horizon);
    Eigen::MatrixXd sd(4, cfg.horizon);
    for (int t = 0; t < cfg.horizon; ++t) {
        mean.col(t) = 0.5 * (lo + hi);
        sd.col(t) = cfg.initial_std * 0.5 * (hi - lo);
    }
    std::vector<std::vector<Action>> seqs;
    auto score = [&](std::span<const Eigen::MatrixXd> cands, std::span<double> out) {
        seqs.assign(cands.size(), std::vector<Action>(static_cast<std::size_t>(cfg.horizon)));
        for (std::size_t k = 0; k < cands.size(); ++k) {
            for (int t = 0; t < cfg.horizon; ++t) seqs[k][static_cast<std::size_t>(t)] = column_action(cands[k], t);
        }
        const auto v = score_sequences(s, seqs, reward, dynamics, cfg.discount);
        std::copy(v.begin(), v.end(), out.begin());
    };
    const CemResult res = cem_optimize(score, lo, hi, mean, sd, cfg,
                                       derive_seed(cfg.seed, "cem", static_cast<std::uint64_t>(s.t)));
    std::vector<Action> plan;
    for (int t = 0; t < cfg.horizon; ++t) plan.push_back(column_action(res.mean, t));
    return plan;
}

Action act(const WorldState& s, const RewardModel& reward, const PlannerConfig& cfg, const PlanningDynamics& dynamics) {
    return cem_plan(s, reward, cfg, dynamics).front();
}

}  // namespace jetpref
