#pragma once

#include "jetpref/dynamics.hpp"
#include "jetpref/oracles.hpp"
#include "jetpref/planner.hpp"
#include "jetpref/prefgraph.hpp"
#include "jetpref/reward_model.hpp"
#include "jetpref/reward_nn.hpp"
#include "jetpref/rewardtree.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace jetpref {

enum class ModelType { TreeZeroOne, TreeVariance, RewardNN };
enum class EvaluatorKind { Oracle, HumanQueue };

std::string_view model_type_name(ModelType m);
ModelType parse_model_type(std::string_view name);
std::string_view evaluator_name(EvaluatorKind e);
EvaluatorKind parse_evaluator(std::string_view name);

struct EvalConfig {
    int episodes = 30;
    int dataset_size = 100;
    double action_noise = 0.2;
    std::uint64_t seed = 20240601;
};

struct ExperimentConfig {
    Task task = Task::Follow;
    ModelType model = ModelType::TreeZeroOne;
    int k_max = 1000;
    int n_max = 200;
    int k_batch = 5;
    std::uint64_t seed = 0;
    OracleConfig oracle;
    /// When > 0, the oracle's beta is calibrated to this disagreement rate on
    /// the evaluation dataset and overrides oracle.beta.
    double oracle_error_rate = 0.0;
    PlannerConfig planner;
    InductionConfig induction;
    RewardNNConfig reward_nn;
    int reward_nn_norm_rollouts = 50;
    DynamicsConfig dynamics;
    std::string dynamics_checkpoint;
    EvaluatorKind evaluator = EvaluatorKind::Oracle;
    EvalConfig eval;
    int checkpoint_stride = 10;

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

/// Reward model learnt online: a tree (either criterion) or the network.
class LearnedModel {
public:
    LearnedModel(const ExperimentConfig& cfg);

    ModelType type() const { return type_; }
    /// Re-fits on the full graph (trees from scratch, the network continues).
    void update(const PreferenceGraph& graph);
    bool trained() const { return trained_; }
    /// Zero reward until the first update.
    RewardModelPtr reward_model() const;
    const RewardTree* tree() const { return tree_ ? &*tree_ : nullptr; }
    const RewardNN* network() const { return nn_.get(); }
    int leaves() const { return tree_ ? tree_->num_leaves() : 0; }
    /// l0-1 of the current model on the graph it was last fitted to.
    ZeroOneLoss last_loss() const { return last_loss_; }

    /// Tree checkpoint (a single zero leaf before the first update) or the
    /// network checkpoint.
    Json to_json() const;
    void save_file(const std::filesystem::path& path) const;
    /// Restores a network from its checkpoint (trees are re-induced instead).
    void load_network(const Json& j, const PreferenceGraph& graph);

private:
    void refresh_loss(const PreferenceGraph& graph);

    ModelType type_;
    InductionConfig induction_;
    std::optional<RewardTree> tree_;
    std::shared_ptr<RewardNN> nn_;
    bool trained_ = false;
    ZeroOneLoss last_loss_;
};

/// Loads a tree or reward-network checkpoint as a reward model.
RewardModelPtr load_reward_model(const std::filesystem::path& path);

struct EpisodeRecord {
    int episode = 0;  // 1-based
    int trajectory_id = -1;
    double online_return = 0.0;
    int edges = 0;
    int leaves = 0;
    int loss_count = 0;
    double loss_fraction = 0.0;
    std::string checkpoint;  // relative path, empty if none was written
};

struct PendingLabel {
    int i = -1;
    int j = -1;
};

/// The online loop. Each episode: roll out the planner against the current
/// model, add the trajectory, issue queries, wait for labels, re-fit.
class OnlineLoop {
public:
    /// eval_dataset is only consulted when the oracle error rate must be
    /// calibrated; it is rebuilt from the config when absent.
    explicit OnlineLoop(ExperimentConfig cfg, std::shared_ptr<const PlanningDynamics> dynamics = nullptr,
                        const std::vector<Trajectory>* eval_dataset = nullptr);

    const ExperimentConfig& config() const { return cfg_; }
    const PreferenceGraph& graph() const { return graph_; }
    const LearnedModel& model() const { return model_; }
    const std::vector<EpisodeRecord>& records() const { return records_; }
    /// Beta actually used by the oracle evaluator.
    double oracle_beta() const { return oracle_beta_; }

    bool finished() const { return static_cast<int>(records_.size()) >= cfg_.n_max; }
    bool awaiting_labels() const { return awaiting_; }
    std::span<const PendingLabel> pending() const { return pending_; }
    int episode() const { return static_cast<int>(records_.size()) + (awaiting_ ? 1 : 0); }
    int preferences_remaining() const { return cfg_.k_max - graph_.num_edges(); }

    /// Rolls out the next episode and issues its queries. Throws StateError if
    /// labels are outstanding or the run is finished.
    std::span<const PendingLabel> begin_episode();
    /// Adds one label (edge with j preferred) for an unlabelled pending query.
    /// Throws InputError when it matches none.
    void add_label(int i, int j, LabelSource source);
    /// Applies any remaining labels and completes the episode.
    void complete_episode(std::span<const std::pair<int, int>> edges, LabelSource source);
    /// Labels outstanding queries with the synthetic oracle.
    std::vector<std::pair<int, int>> oracle_labels();

    /// Runs to completion with the oracle evaluator.
    void run();

    /// Optional artifact directory: checkpoints are written as episodes finish.
    void set_artifact_dir(std::filesystem::path dir) { artifact_dir_ = std::move(dir); }

    /// Resumes from persisted state. Trees are re-induced from the graph; the
    /// network is restored from network_state when given. Non-empty pending
    /// puts the loop back into the label-wait state for the last trajectory.
    void restore(PreferenceGraph graph, std::vector<EpisodeRecord> records, std::vector<PendingLabel> pending,
                 const Json* network_state = nullptr);

private:
    int match_pending(int i, int j) const;

    ExperimentConfig cfg_;
    std::shared_ptr<const PlanningDynamics> dynamics_;
    PreferenceGraph graph_;
    LearnedModel model_;
    std::optional<PreferenceOracle> oracle_;
    double oracle_beta_ = 0.0;
    std::vector<EpisodeRecord> records_;
    std::vector<PendingLabel> pending_;
    std::vector<char> labeled_;
    EpisodeRecord current_;
    bool awaiting_ = false;
    std::filesystem::path artifact_dir_;
};

struct RunArtifacts {
    ExperimentConfig config;
    std::vector<EpisodeRecord> records;
    PreferenceGraph graph;
    std::shared_ptr<LearnedModel> model;
    double oracle_beta = 0.0;
};

/// Builds the planning dynamics the config asks for (training an ensemble
/// inline when learned mode has no checkpoint).
std::shared_ptr<const PlanningDynamics> make_dynamics(const ExperimentConfig& cfg);

RunArtifacts run_online(const ExperimentConfig& cfg, std::shared_ptr<const PlanningDynamics> dynamics = nullptr,
                        const std::filesystem::path& artifact_dir = {},
                        const std::vector<Trajectory>* eval_dataset = nullptr);

/// Beta for the run's oracle: oracle.beta, or the calibrated value when an
/// error rate is configured.
double resolve_oracle_beta(const ExperimentConfig& cfg, const std::vector<Trajectory>& eval_dataset);

/// Mean oracle return over fresh seeded planner rollouts against model.
struct PolicyEvaluation {
    std::vector<double> returns;
    std::vector<Trajectory> trajectories;
    double mean = 0.0;
};
PolicyEvaluation evaluate_policy(const RewardModel& model, const ExperimentConfig& cfg, int episodes,
                                 const PlanningDynamics& dynamics);
PolicyEvaluation evaluate_random_policy(const ExperimentConfig& cfg, int episodes);

/// Oracle-planner rollouts with each action replaced by a uniform-random one
/// with probability action_noise.
std::vector<Trajectory> build_eval_dataset(Task task, const PlannerConfig& planner, int n, double action_noise,
                                           std::uint64_t seed, const PlanningDynamics& dynamics);

/// All pairs of oracle returns over the dataset, for beta calibration.
std::vector<std::pair<double, double>> return_pairs(const std::vector<Trajectory>& dataset, const OracleConfig& oracle);

std::optional<double> reward_correlation(const RewardModel& model, const std::vector<Trajectory>& dataset, Task task);
std::optional<double> return_kendall_tau(const RewardModel& model, const std::vector<Trajectory>& dataset, Task task);

/// Cached oracle/random baselines and the evaluation dataset for one task.
struct EvalContext {
    Task task = Task::Follow;
    std::vector<Trajectory> dataset;
    double oracle_mean = 0.0;
    double random_mean = 0.0;
};
/// The dataset always comes from the true simulator; the oracle baseline uses
/// the same dynamics as the agents being evaluated.
EvalContext make_eval_context(const ExperimentConfig& cfg, const PlanningDynamics& dynamics);

struct RunEvaluation {
    double model_mean = 0.0;
    double orr = 0.0;
    std::optional<double> correlation;
    std::optional<double> kendall;
    std::vector<double> returns;
    /// Fraction of evaluation episodes with at least one transition below alt 50.
    double altitude_violation_fraction = 0.0;
};
RunEvaluation evaluate_run(const RewardModel& model, const ExperimentConfig& cfg, const EvalContext& ctx,
                           const PlanningDynamics& dynamics);

enum class SweepAxis { KMax, NMax, ErrorRate, Myopia };
std::string_view sweep_axis_name(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepRow {
    double value = 0.0;
    int repeat = 0;
    double orr = 0.0;
    std::optional<double> kendall;
};
struct SweepSummary {
    double value = 0.0;
    double orr_median = 0.0;
    double orr_iqr = 0.0;
    double kendall_median = 0.0;
    double kendall_iqr = 0.0;
};
struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summary;
};

/// Substitutes each value on the axis (error rates become calibrated betas),
/// runs repeats with seeds base.seed + r, and evaluates on the common set.
/// Cells run on up to jobs threads; results do not depend on jobs.
SweepResult sensitivity_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                              int repeats, int jobs = 1);

/// Substitutes one axis value into a config (error rates via calibration).
ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, double value);

/// Writes config.txt, graph.jsonl, metrics.tsv and the final model into dir.
void write_artifacts(const RunArtifacts& run, const std::filesystem::path& dir);
void write_metrics_tsv(std::span<const EpisodeRecord> records, std::ostream& out);
void write_sweep_tsv(const SweepResult& result, SweepAxis axis, std::ostream& out);
void write_sweep_summary_tsv(const SweepResult& result, SweepAxis axis, std::ostream& out);

}  // namespace jetpref
