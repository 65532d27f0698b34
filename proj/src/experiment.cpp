#include "jetpref/experiment.hpp"

#include "jetpref/config.hpp"
#include "jetpref/error.hpp"
#include "jetpref/metrics.hpp"
#include "jetpref/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace jetpref {

std::string_view model_type_name(ModelType m) {
    switch (m) {
        case ModelType::TreeZeroOne: return "tree-0-1";
        case ModelType::TreeVariance: return "tree-variance";
        case ModelType::RewardNN: return "reward-nn";
    }
    return "?";
}

ModelType parse_model_type(std::string_view name) {
    if (name == "tree-0-1") return ModelType::TreeZeroOne;
    if (name == "tree-variance") return ModelType::TreeVariance;
    if (name == "reward-nn") return ModelType::RewardNN;
    throw ConfigError("unknown model type '" + std::string(name) + "' (expected tree-0-1, tree-variance or reward-nn)");
}

std::string_view evaluator_name(EvaluatorKind e) { return e == EvaluatorKind::Oracle ? "oracle" : "human-queue"; }

EvaluatorKind parse_evaluator(std::string_view name) {
    if (name == "oracle") return EvaluatorKind::Oracle;
    if (name == "human-queue") return EvaluatorKind::HumanQueue;
    throw ConfigError("unknown evaluator '" + std::string(name) + "' (expected oracle or human-queue)");
}

void ExperimentConfig::validate() const {
    if (k_max < 0) throw ConfigError("k_max must be >= 0");
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
    if (k_batch < 0) throw ConfigError("k_batch must be >= 0");
    if (checkpoint_stride < 0) throw ConfigError("checkpoint_stride must be >= 0");
    if (!(oracle_error_rate >= 0.0 && oracle_error_rate < 0.5)) throw ConfigError("oracle.error_rate must be in [0, 0.5)");
    if (reward_nn_norm_rollouts < 1) throw ConfigError("reward_nn.norm_rollouts must be >= 1");
    if (eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
    if (eval.dataset_size < 0) throw ConfigError("eval.dataset_size must be >= 0");
    if (!(eval.action_noise >= 0.0 && eval.action_noise <= 1.0)) throw ConfigError("eval.action_noise must be in [0, 1]");
    try {
        oracle.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("oracle: ") + e.what());
    }
    planner.validate();
    induction.validate();
    reward_nn.validate();
    dynamics.validate();
}

namespace {

OracleConfig unbiased_oracle(Task task) {
    OracleConfig oc;
    oc.task = task;
    return oc;
}

InductionConfig induction_for(const ExperimentConfig& cfg) {
    InductionConfig ic = cfg.induction;
    ic.split_criterion = cfg.model == ModelType::TreeVariance ? SplitCriterion::Variance : SplitCriterion::ZeroOne;
    return ic;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump() << '\n';
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

LearnedModel::LearnedModel(const ExperimentConfig& cfg) : type_(cfg.model), induction_(induction_for(cfg)) {
    if (type_ == ModelType::RewardNN) {
        RewardNNConfig nc = cfg.reward_nn;
        nc.seed = derive_seed(cfg.seed, "reward-nn");
        nn_ = std::make_shared<RewardNN>(
            nc, feature_standardizer(cfg.task, cfg.reward_nn_norm_rollouts, derive_seed(cfg.seed, "reward-nn-norm")));
    }
}

void LearnedModel::refresh_loss(const PreferenceGraph& graph) {
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(graph.num_trajectories()));
    for (const auto& traj : graph.trajectories()) g.push_back(model_return(*nn_, traj));
    last_loss_ = loss_0_1(graph, g, tie_tolerance(g));
}

void LearnedModel::update(const PreferenceGraph& graph) {
    if (graph.num_edges() == 0) return;
    if (type_ == ModelType::RewardNN) {
        nn_->update(graph);
        refresh_loss(graph);
    } else {
        InductionResult res = induce(graph, induction_);
        tree_ = std::move(res.tree);
        last_loss_ = res.loss;
    }
    trained_ = true;
}

RewardModelPtr LearnedModel::reward_model() const {
    if (!trained_) return std::make_shared<ZeroReward>();
    if (type_ == ModelType::RewardNN) return std::make_shared<RewardNN>(*nn_);
    return std::make_shared<TreeReward>(*tree_);
}

Json LearnedModel::to_json() const {
    if (type_ == ModelType::RewardNN) return nn_->to_json();
    return tree_ ? tree_->to_json() : RewardTree(0.0).to_json();
}

void LearnedModel::save_file(const std::filesystem::path& path) const { write_json_file(to_json(), path); }

void LearnedModel::load_network(const Json& j, const PreferenceGraph& graph) {
    if (type_ != ModelType::RewardNN) throw StateError("load_network on a tree model");
    nn_ = std::make_shared<RewardNN>(RewardNN::from_json(j));
    trained_ = graph.num_edges() > 0;
    if (trained_) refresh_loss(graph);
}

RewardModelPtr load_reward_model(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    const std::string format = j.value("format", "");
    if (format == "jetpref-tree") return std::make_shared<TreeReward>(RewardTree::from_json(j));
    if (format == "jetpref-reward-nn") return std::make_shared<RewardNN>(RewardNN::from_json(j));
    throw InputError(path.string() + " is neither a tree nor a reward network checkpoint");
}

std::shared_ptr<const PlanningDynamics> make_dynamics(const ExperimentConfig& cfg) {
    if (cfg.planner.model == DynamicsMode::TrueSimulator) return std::make_shared<SimulatorDynamics>();
    std::shared_ptr<DynamicsEnsemble> ens;
    if (!cfg.dynamics_checkpoint.empty()) {
        ens = std::make_shared<DynamicsEnsemble>(DynamicsEnsemble::load_file(cfg.dynamics_checkpoint));
        if (ens->task() != cfg.task) {
            throw ConfigError("dynamics.checkpoint was trained on " + std::string(task_name(ens->task())) +
                              ", not " + std::string(task_name(cfg.task)));
        }
    } else {
        const auto data = collect_random_transitions(cfg.task, cfg.dynamics.transitions,
                                                     derive_seed(cfg.dynamics.seed, "transitions"));
        ens = std::make_shared<DynamicsEnsemble>(DynamicsEnsemble::train(data, cfg.dynamics));
    }
    return std::make_shared<EnsembleDynamics>(std::move(ens));
}

double resolve_oracle_beta(const ExperimentConfig& cfg, const std::vector<Trajectory>& eval_dataset) {
    if (!(cfg.oracle_error_rate > 0.0)) return cfg.oracle.beta;
    OracleConfig oc = cfg.oracle;
    oc.task = cfg.task;
    const auto pairs = return_pairs(eval_dataset, oc);
    return calibrate_beta(cfg.oracle_error_rate, pairs);
}

OnlineLoop::OnlineLoop(ExperimentConfig cfg, std::shared_ptr<const PlanningDynamics> dynamics,
                       const std::vector<Trajectory>* eval_dataset)
    : cfg_(std::move(cfg)), dynamics_(std::move(dynamics)), graph_(cfg_.task), model_((cfg_.validate(), cfg_)) {
    if (!dynamics_) dynamics_ = make_dynamics(cfg_);
    oracle_beta_ = cfg_.oracle.beta;
    if (cfg_.oracle_error_rate > 0.0) {
        if (eval_dataset) {
            oracle_beta_ = resolve_oracle_beta(cfg_, *eval_dataset);
        } else {
            const auto dataset = build_eval_dataset(cfg_.task, cfg_.planner, cfg_.eval.dataset_size,
                                                    cfg_.eval.action_noise, cfg_.eval.seed, SimulatorDynamics{});
            oracle_beta_ = resolve_oracle_beta(cfg_, dataset);
        }
    }
    OracleConfig oc = cfg_.oracle;
    oc.task = cfg_.task;
    oc.beta = oracle_beta_;
    oc.seed = derive_seed(cfg_.seed, "oracle");
    oracle_.emplace(oc);
}

std::span<const PendingLabel> OnlineLoop::begin_episode() {
    if (awaiting_) throw StateError("labels for episode " + std::to_string(episode()) + " are outstanding");
    if (finished()) throw StateError("run is finished");
    const auto ep = static_cast<std::uint64_t>(records_.size() + 1);
    const RewardModelPtr reward = model_.reward_model();
    PlannerConfig pc = cfg_.planner;
    pc.seed = derive_seed(cfg_.seed, "planner", ep);
    const auto& dyn = *dynamics_;
    const Policy policy = [&](const WorldState& s) { return act(s, *reward, pc, dyn); };
    Trajectory traj = rollout(policy, cfg_.task, derive_seed(cfg_.seed, "episode", ep), Provenance::OnlineAgent);
    current_ = EpisodeRecord{};
    current_.episode = static_cast<int>(ep);
    current_.online_return = oracle_return(traj, unbiased_oracle(cfg_.task));
    current_.trajectory_id = graph_.add_trajectory(std::move(traj));
    const int k = std::max(0, std::min(cfg_.k_batch, preferences_remaining()));
    pending_.clear();
    for (const auto& [i, j] : graph_.sample_queries(current_.trajectory_id, k, derive_seed(cfg_.seed, "queries", ep))) {
        pending_.push_back({i, j});
    }
    labeled_.assign(pending_.size(), 0);
    awaiting_ = true;
    return pending_;
}

int OnlineLoop::match_pending(int i, int j) const {
    for (std::size_t q = 0; q < pending_.size(); ++q) {
        const auto& p = pending_[q];
        if (!labeled_[q] && ((p.i == i && p.j == j) || (p.i == j && p.j == i))) return static_cast<int>(q);
    }
    throw InputError("label (" + std::to_string(i) + ", " + std::to_string(j) + ") matches no pending query");
}

void OnlineLoop::add_label(int i, int j, LabelSource source) {
    if (!awaiting_) throw StateError("no episode is awaiting labels");
    const int q = match_pending(i, j);
    graph_.add_preference(i, j, source, static_cast<std::int64_t>(graph_.num_edges() + 1));
    labeled_[static_cast<std::size_t>(q)] = 1;
}

void OnlineLoop::complete_episode(std::span<const std::pair<int, int>> edges, LabelSource source) {
    if (!awaiting_) throw StateError("no episode is awaiting labels");
    {
        // Validate the whole batch before mutating the graph.
        std::vector<char> saved = labeled_;
        for (const auto& [i, j] : edges) labeled_[static_cast<std::size_t>(match_pending(i, j))] = 1;
        labeled_ = std::move(saved);
    }
    for (const auto& [i, j] : edges) add_label(i, j, source);
    const bool any_label = std::find(labeled_.begin(), labeled_.end(), 1) != labeled_.end();
    if (any_label || (model_.type() == ModelType::RewardNN && graph_.num_edges() > 0)) model_.update(graph_);
    current_.edges = graph_.num_edges();
    current_.leaves = model_.leaves();
    current_.loss_count = model_.last_loss().count;
    current_.loss_fraction = model_.last_loss().fraction;
    const bool last = current_.episode == cfg_.n_max;
    if (!artifact_dir_.empty() && cfg_.checkpoint_stride > 0 &&
        (current_.episode % cfg_.checkpoint_stride == 0 || last)) {
        char name[48];
        std::snprintf(name, sizeof name, "checkpoints/episode_%04d.json", current_.episode);
        std::filesystem::create_directories(artifact_dir_ / "checkpoints");
        model_.save_file(artifact_dir_ / name);
        current_.checkpoint = name;
    }
    records_.push_back(current_);
    pending_.clear();
    labeled_.clear();
    awaiting_ = false;
}

std::vector<std::pair<int, int>> OnlineLoop::oracle_labels() {
    std::vector<std::pair<int, int>> out;
    for (const auto& p : pending_) {
        const auto outcome = oracle_->prefer(graph_.trajectory(p.i), graph_.trajectory(p.j));
        if (outcome == PreferenceOutcome::SecondPreferred) {
            out.emplace_back(p.i, p.j);
        } else {
            out.emplace_back(p.j, p.i);
        }
    }
    return out;
}

void OnlineLoop::run() {
    if (cfg_.evaluator != EvaluatorKind::Oracle) {
        throw StateError("run() labels with the oracle; the human-queue evaluator is driven by the elicitation service");
    }
    if (awaiting_) complete_episode(oracle_labels(), LabelSource::Oracle);
    while (!finished()) {
        begin_episode();
        complete_episode(oracle_labels(), LabelSource::Oracle);
    }
}

void OnlineLoop::restore(PreferenceGraph graph, std::vector<EpisodeRecord> records, std::vector<PendingLabel> pending,
                         const Json* network_state) {
    if (graph.task() != cfg_.task) throw InputError("restored graph belongs to another task");
    const auto done = static_cast<int>(records.size());
    const int n = graph.num_trajectories();
    if ((n != done && n != done + 1) || (!pending.empty() && n != done + 1)) {
        throw InputError("restored graph has " + std::to_string(graph.num_trajectories()) + " trajectories for " +
                         std::to_string(done) + " completed episodes");
    }
    graph_ = std::move(graph);
    records_ = std::move(records);
    pending_ = std::move(pending);
    // Queried pairs are never compared before issue, so a compared pair was labelled this episode.
    labeled_.clear();
    for (const auto& p : pending_) labeled_.push_back(graph_.compared(p.i, p.j) ? 1 : 0);
    model_ = LearnedModel(cfg_);
    if (model_.type() == ModelType::RewardNN) {
        if (network_state) model_.load_network(*network_state, graph_);
    } else {
        model_.update(graph_);
    }
    // A trajectory without a completed record is the episode awaiting labels.
    awaiting_ = graph_.num_trajectories() == done + 1;
    if (awaiting_) {
        current_ = EpisodeRecord{};
        current_.episode = done + 1;
        current_.trajectory_id = graph_.num_trajectories() - 1;
        current_.online_return = oracle_return(graph_.trajectory(current_.trajectory_id), unbiased_oracle(cfg_.task));
    }
}

RunArtifacts run_online(const ExperimentConfig& cfg, std::shared_ptr<const PlanningDynamics> dynamics,
                        const std::filesystem::path& artifact_dir, const std::vector<Trajectory>* eval_dataset) {
    OnlineLoop loop(cfg, std::move(dynamics), eval_dataset);
    if (!artifact_dir.empty()) {
        std::filesystem::create_directories(artifact_dir);
        loop.set_artifact_dir(artifact_dir);
    }
    loop.run();
    RunArtifacts out{cfg, loop.records(), loop.graph(), std::make_shared<LearnedModel>(loop.model()),
                     loop.oracle_beta()};
    if (!artifact_dir.empty()) write_artifacts(out, artifact_dir);
    return out;
}

PolicyEvaluation evaluate_policy(const RewardModel& model, const ExperimentConfig& cfg, int episodes,
                                 const PlanningDynamics& dynamics) {
    PolicyEvaluation out;
    const OracleConfig oc = unbiased_oracle(cfg.task);
    for (int e = 0; e < episodes; ++e) {
        const auto idx = static_cast<std::uint64_t>(e);
        PlannerConfig pc = cfg.planner;
        pc.seed = derive_seed(cfg.eval.seed, "eval-planner", idx);
        const Policy policy = [&](const WorldState& s) { return act(s, model, pc, dynamics); };
        Trajectory traj = rollout(policy, cfg.task, derive_seed(cfg.eval.seed, "eval-episode", idx));
        traj.id = e;
        out.returns.push_back(oracle_return(traj, oc));
        out.trajectories.push_back(std::move(traj));
    }
    if (!out.returns.empty()) {
        double sum = 0.0;
        for (double g : out.returns) sum += g;
        out.mean = sum / static_cast<double>(out.returns.size());
    }
    return out;
}

PolicyEvaluation evaluate_random_policy(const ExperimentConfig& cfg, int episodes) {
    PolicyEvaluation out;
    const OracleConfig oc = unbiased_oracle(cfg.task);
    for (int e = 0; e < episodes; ++e) {
        const auto idx = static_cast<std::uint64_t>(e);
        const std::uint64_t key = derive_seed(cfg.eval.seed, "eval-random", idx);
        const Policy policy = [key](const WorldState& s) { return random_action(key, s.t); };
        Trajectory traj = rollout(policy, cfg.task, derive_seed(cfg.eval.seed, "eval-episode", idx), Provenance::Random);
        traj.id = e;
        out.returns.push_back(oracle_return(traj, oc));
        out.trajectories.push_back(std::move(traj));
    }
    if (!out.returns.empty()) {
        double sum = 0.0;
        for (double g : out.returns) sum += g;
        out.mean = sum / static_cast<double>(out.returns.size());
    }
    return out;
}

std::vector<Trajectory> build_eval_dataset(Task task, const PlannerConfig& planner, int n, double action_noise,
                                           std::uint64_t seed, const PlanningDynamics& dynamics) {
    if (n < 0) throw InputError("build_eval_dataset: n must be >= 0");
    if (!(action_noise >= 0.0 && action_noise <= 1.0)) throw InputError("build_eval_dataset: noise must be in [0, 1]");
    const OracleReward oracle(task);
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int e = 0; e < n; ++e) {
        const auto idx = static_cast<std::uint64_t>(e);
        PlannerConfig pc = planner;
        pc.seed = derive_seed(seed, "dataset-planner", idx);
        const std::uint64_t noise_key = derive_seed(seed, "dataset-noise", idx);
        const std::uint64_t random_key = derive_seed(seed, "dataset-random", idx);
        const Policy policy = [&](const WorldState& s) {
            if (hashed_uniform(noise_key, static_cast<std::uint64_t>(s.t)) < action_noise) {
                return random_action(random_key, s.t);
            }
            return act(s, oracle, pc, dynamics);
        };
        Trajectory traj = rollout(policy, task, derive_seed(seed, "dataset-episode", idx), Provenance::OracleEval);
        traj.id = e;
        out.push_back(std::move(traj));
    }
    return out;
}

std::vector<std::pair<double, double>> return_pairs(const std::vector<Trajectory>& dataset, const OracleConfig& oracle) {
    std::vector<double> g;
    g.reserve(dataset.size());
    for (const auto& traj : dataset) g.push_back(oracle_return(traj, oracle));
    std::vector<std::pair<double, double>> out;
    for (std::size_t a = 0; a < g.size(); ++a) {
        for (std::size_t b = a + 1; b < g.size(); ++b) out.emplace_back(g[a], g[b]);
    }
    return out;
}

std::optional<double> reward_correlation(const RewardModel& model, const std::vector<Trajectory>& dataset, Task task) {
    if (dataset.empty()) throw InputError("reward_correlation: empty dataset");
    std::vector<FeatureVector> xs;
    std::vector<double> truth;
    for (const auto& traj : dataset) {
        for (const auto& tr : traj.transitions) {
            xs.push_back(tr.x);
            truth.push_back(oracle_reward(task, tr.x));
        }
    }
    std::vector<double> pred(xs.size());
    model.reward_batch(xs, pred);
    return pearson(pred, truth);
}

std::optional<double> return_kendall_tau(const RewardModel& model, const std::vector<Trajectory>& dataset, Task task) {
    const OracleConfig oc = unbiased_oracle(task);
    std::vector<double> pred, truth;
    for (const auto& traj : dataset) {
        pred.push_back(model_return(model, traj));
        truth.push_back(oracle_return(traj, oc));
    }
    return kendall_tau(pred, truth);
}

EvalContext make_eval_context(const ExperimentConfig& cfg, const PlanningDynamics& dynamics) {
    EvalContext ctx;
    ctx.task = cfg.task;
    ctx.dataset = build_eval_dataset(cfg.task, cfg.planner, cfg.eval.dataset_size, cfg.eval.action_noise,
                                     cfg.eval.seed, SimulatorDynamics{});
    ctx.oracle_mean = evaluate_policy(OracleReward(cfg.task), cfg, cfg.eval.episodes, dynamics).mean;
    ctx.random_mean = evaluate_random_policy(cfg, cfg.eval.episodes).mean;
    return ctx;
}

RunEvaluation evaluate_run(const RewardModel& model, const ExperimentConfig& cfg, const EvalContext& ctx,
                           const PlanningDynamics& dynamics) {
    RunEvaluation out;
    const PolicyEvaluation pe = evaluate_policy(model, cfg, cfg.eval.episodes, dynamics);
    out.model_mean = pe.mean;
    out.returns = pe.returns;
    out.orr = orr(pe.mean, ctx.oracle_mean, ctx.random_mean);
    if (!ctx.dataset.empty()) out.correlation = reward_correlation(model, ctx.dataset, ctx.task);
    if (ctx.dataset.size() >= 2) out.kendall = return_kendall_tau(model, ctx.dataset, ctx.task);
    int violations = 0;
    for (const auto& traj : pe.trajectories) {
        const bool low = std::any_of(traj.transitions.begin(), traj.transitions.end(),
                                     [](const Transition& tr) { return tr.x[kAlt] < 50.0; });
        violations += low ? 1 : 0;
    }
    out.altitude_violation_fraction =
        pe.trajectories.empty() ? 0.0 : static_cast<double>(violations) / static_cast<double>(pe.trajectories.size());
    return out;
}

std::string_view sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::KMax: return "k_max";
        case SweepAxis::NMax: return "n_max";
        case SweepAxis::ErrorRate: return "error_rate";
        case SweepAxis::Myopia: return "myopia";
    }
    return "?";
}

SweepAxis parse_sweep_axis(std::string_view name) {
    if (name == "k_max") return SweepAxis::KMax;
    if (name == "n_max") return SweepAxis::NMax;
    if (name == "error_rate") return SweepAxis::ErrorRate;
    if (name == "myopia") return SweepAxis::Myopia;
    throw ConfigError("unknown sweep axis '" + std::string(name) + "' (expected k_max, n_max, error_rate or myopia)");
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig cfg = base;
    const auto as_int = [&](int min) {
        if (!(std::floor(value) == value && value >= min && value <= std::numeric_limits<int>::max())) {
            throw ConfigError(std::string(sweep_axis_name(axis)) + " value " + fmt_double(value) +
                              " must be an integer >= " + std::to_string(min));
        }
        return static_cast<int>(value);
    };
    switch (axis) {
        case SweepAxis::KMax: cfg.k_max = as_int(0); break;
        case SweepAxis::NMax: cfg.n_max = as_int(1); break;
        case SweepAxis::ErrorRate:
            if (!(value >= 0.0 && value < 0.5)) throw ConfigError("error_rate values must be in [0, 0.5)");
            cfg.oracle_error_rate = value;
            if (value == 0.0) cfg.oracle.beta = 0.0;
            break;
        case SweepAxis::Myopia:
            if (!(value > 0.0 && value <= 1.0)) throw ConfigError("myopia values must be in (0, 1]");
            cfg.oracle.recency_discount = value;
            break;
    }
    cfg.validate();
    return cfg;
}

SweepResult sensitivity_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                              int repeats, int jobs) {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    std::vector<ExperimentConfig> cells;
    for (double v : values) {
        for (int r = 0; r < repeats; ++r) {
            ExperimentConfig cfg = apply_sweep_value(base, axis, v);
            cfg.seed = base.seed + static_cast<std::uint64_t>(r);
            cells.push_back(std::move(cfg));
        }
    }
    const auto dynamics = make_dynamics(base);
    const EvalContext ctx = make_eval_context(base, *dynamics);

    SweepResult out;
    out.rows.resize(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    const auto worker = [&] {
        for (std::size_t k = next++; k < cells.size(); k = next++) {
            try {
                const RunArtifacts run = run_online(cells[k], dynamics, {}, &ctx.dataset);
                const RunEvaluation ev = evaluate_run(*run.model->reward_model(), cells[k], ctx, *dynamics);
                out.rows[k] = SweepRow{values[k / static_cast<std::size_t>(repeats)],
                                       static_cast<int>(k % static_cast<std::size_t>(repeats)), ev.orr, ev.kendall};
            } catch (...) {
                const std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = cells.size();
            }
        }
    };
    const int n_threads = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t v = 0; v < values.size(); ++v) {
        std::vector<double> orrs, taus;
        for (int r = 0; r < repeats; ++r) {
            const auto& row = out.rows[v * static_cast<std::size_t>(repeats) + static_cast<std::size_t>(r)];
            orrs.push_back(row.orr);
            if (row.kendall) taus.push_back(*row.kendall);
        }
        SweepSummary s;
        s.value = values[v];
        s.orr_median = median(orrs);
        s.orr_iqr = iqr(orrs);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.kendall_median = taus.empty() ? nan : median(taus);
        s.kendall_iqr = taus.empty() ? nan : iqr(taus);
        out.summary.push_back(s);
    }
    return out;
}

void write_metrics_tsv(std::span<const EpisodeRecord> records, std::ostream& out) {
    out << "episode\ttrajectory_id\tonline_return\tedges\tleaves\tloss_count\tloss_fraction\tcheckpoint\n";
    for (const auto& r : records) {
        out << r.episode << '\t' << r.trajectory_id << '\t' << fmt_double(r.online_return) << '\t' << r.edges << '\t'
            << r.leaves << '\t' << r.loss_count << '\t' << fmt_double(r.loss_fraction) << '\t'
            << (r.checkpoint.empty() ? "-" : r.checkpoint) << '\n';
    }
}

void write_sweep_tsv(const SweepResult& result, SweepAxis axis, std::ostream& out) {
    out << sweep_axis_name(axis) << "\trepeat\torr\tkendall_tau\n";
    for (const auto& r : result.rows) {
        out << fmt_double(r.value) << '\t' << r.repeat << '\t' << fmt_double(r.orr) << '\t'
            << (r.kendall ? fmt_double(*r.kendall) : "nan") << '\n';
    }
}

void write_sweep_summary_tsv(const SweepResult& result, SweepAxis axis, std::ostream& out) {
    out << sweep_axis_name(axis) << "\torr_median\torr_iqr\tkendall_median\tkendall_iqr\n";
    for (const auto& s : result.summary) {
        out << fmt_double(s.value) << '\t' << fmt_double(s.orr_median) << '\t' << fmt_double(s.orr_iqr) << '\t'
            << fmt_double(s.kendall_median) << '\t' << fmt_double(s.kendall_iqr) << '\n';
    }
}

void write_artifacts(const RunArtifacts& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "config.txt");
        if (!out) throw InputError("cannot write " + (dir / "config.txt").string());
        out << config_to_text(run.config);
    }
    run.graph.save_file(dir / "graph.jsonl");
    {
        std::ofstream out(dir / "metrics.tsv");
        if (!out) throw InputError("cannot write " + (dir / "metrics.tsv").string());
        write_metrics_tsv(run.records, out);
    }
    run.model->save_file(dir / "model.json");
    write_json_file(Json{{"oracle_beta", run.oracle_beta},
                         {"episodes", static_cast<int>(run.records.size())},
                         {"edges", run.graph.num_edges()},
                         {"model", model_type_name(run.config.model)},
                         {"task", task_name(run.config.task)}},
                    dir / "run.json");
}

}  // namespace jetpref
