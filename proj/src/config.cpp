#include "jetpref/config.hpp"

#include "jetpref/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace jetpref {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError("config key '" + std::string(key) + "': expected an integer, got '" + std::string(v) + "'");
    }
    return out;
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

std::string show(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

struct Entry {
    ConfigKey meta;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Get>
Entry int_entry(std::string key, std::string help, Get field) {
    const std::string k = key;
    return {{std::move(key), "int", std::move(help)},
            [k, field](ExperimentConfig& c, std::string_view v) { field(c) = parse_integer<int>(k, v); },
            [field](const ExperimentConfig& c) { return std::to_string(field(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Get>
Entry u64_entry(std::string key, std::string help, Get field) {
    const std::string k = key;
    return {{std::move(key), "uint", std::move(help)},
            [k, field](ExperimentConfig& c, std::string_view v) { field(c) = parse_integer<std::uint64_t>(k, v); },
            [field](const ExperimentConfig& c) { return std::to_string(field(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Get>
Entry real_entry(std::string key, std::string help, Get field) {
    const std::string k = key;
    return {{std::move(key), "real", std::move(help)},
            [k, field](ExperimentConfig& c, std::string_view v) { field(c) = parse_double(k, v); },
            [field](const ExperimentConfig& c) { return show(field(const_cast<ExperimentConfig&>(c))); }};
}

// Enum-like values: the parser throws ConfigError and the message gets the key prepended.
template <typename Get, typename Parse, typename Name>
Entry choice_entry(std::string key, std::string type, std::string help, Get field, Parse parse, Name name) {
    const std::string k = key;
    return {{std::move(key), std::move(type), std::move(help)},
            [k, field, parse](ExperimentConfig& c, std::string_view v) {
                try {
                    field(c) = parse(v);
                } catch (const ConfigError& e) {
                    throw ConfigError("config key '" + k + "': " + e.what());
                }
            },
            [field, name](const ExperimentConfig& c) {
                return std::string(name(field(const_cast<ExperimentConfig&>(c))));
            }};
}

const std::vector<Entry>& entries() {
    using C = ExperimentConfig;
    static const std::vector<Entry> table = {
        choice_entry("task", "follow|chase|land", "set-piece task",
                     [](C& c) -> Task& { return c.task; }, parse_task, task_name),
        choice_entry("model", "tree-0-1|tree-variance|reward-nn", "reward model learnt online",
                     [](C& c) -> ModelType& { return c.model; }, parse_model_type, model_type_name),
        u64_entry("seed", "base seed of the run", [](C& c) -> std::uint64_t& { return c.seed; }),
        int_entry("k_max", "total preference budget", [](C& c) -> int& { return c.k_max; }),
        int_entry("n_max", "number of online episodes", [](C& c) -> int& { return c.n_max; }),
        int_entry("k_batch", "queries issued per episode", [](C& c) -> int& { return c.k_batch; }),
        choice_entry("evaluator", "oracle|human-queue", "source of preference labels",
                     [](C& c) -> EvaluatorKind& { return c.evaluator; }, parse_evaluator, evaluator_name),
        int_entry("checkpoint_stride", "write a model checkpoint every this many episodes (0 = final only)",
                  [](C& c) -> int& { return c.checkpoint_stride; }),
        real_entry("oracle.beta", "Bradley-Terry temperature (0 = deterministic)",
                   [](C& c) -> double& { return c.oracle.beta; }),
        real_entry("oracle.recency_discount", "myopic weight base in (0, 1]; 1 = unbiased",
                   [](C& c) -> double& { return c.oracle.recency_discount; }),
        real_entry("oracle.error_rate", "if > 0, calibrate beta to this disagreement rate",
                   [](C& c) -> double& { return c.oracle_error_rate; }),
        int_entry("planner.horizon", "planning horizon H", [](C& c) -> int& { return c.planner.horizon; }),
        real_entry("planner.discount", "discount over the horizon", [](C& c) -> double& { return c.planner.discount; }),
        int_entry("planner.iterations", "CEM iterations", [](C& c) -> int& { return c.planner.iterations; }),
        int_entry("planner.candidates", "sequences sampled per iteration",
                  [](C& c) -> int& { return c.planner.candidates; }),
        int_entry("planner.elites", "elite sequences per iteration", [](C& c) -> int& { return c.planner.elites; }),
        real_entry("planner.learning_rate", "rate of the move toward elite statistics",
                   [](C& c) -> double& { return c.planner.learning_rate; }),
        real_entry("planner.initial_std", "initial std as a fraction of each action half-range",
                   [](C& c) -> double& { return c.planner.initial_std; }),
        choice_entry("planner.model", "true-simulator|learned-ensemble", "dynamics used for planning",
                     [](C& c) -> DynamicsMode& { return c.planner.model; }, parse_dynamics_mode, dynamics_mode_name),
        int_entry("induction.max_leaves", "tree size limit", [](C& c) -> int& { return c.induction.max_leaves; }),
        real_entry("induction.alpha", "pruning regularization per leaf", [](C& c) -> double& { return c.induction.alpha; }),
        real_entry("induction.adam_learning_rate", "learning rate of return estimation",
                   [](C& c) -> double& { return c.induction.adam_learning_rate; }),
        real_entry("induction.convergence_threshold", "stop return estimation when the loss changes less than this",
                   [](C& c) -> double& { return c.induction.convergence_threshold; }),
        int_entry("induction.max_adam_steps", "cap on return estimation steps",
                  [](C& c) -> int& { return c.induction.max_adam_steps; }),
        int_entry("induction.max_thresholds_per_feature", "0 = every midpoint; otherwise evenly thinned",
                  [](C& c) -> int& { return c.induction.max_thresholds_per_feature; }),
        int_entry("reward_nn.hidden_layers", "hidden layers of the reward network",
                  [](C& c) -> int& { return c.reward_nn.hidden_layers; }),
        int_entry("reward_nn.hidden_units", "units per hidden layer", [](C& c) -> int& { return c.reward_nn.hidden_units; }),
        int_entry("reward_nn.batches_per_update", "mini-batches per update",
                  [](C& c) -> int& { return c.reward_nn.batches_per_update; }),
        int_entry("reward_nn.batch_size", "preferences per mini-batch", [](C& c) -> int& { return c.reward_nn.batch_size; }),
        real_entry("reward_nn.learning_rate", "Adam learning rate", [](C& c) -> double& { return c.reward_nn.learning_rate; }),
        int_entry("reward_nn.norm_rollouts", "random rollouts used to fit input normalization",
                  [](C& c) -> int& { return c.reward_nn_norm_rollouts; }),
        int_entry("dynamics.members", "ensemble size", [](C& c) -> int& { return c.dynamics.members; }),
        int_entry("dynamics.hidden_layers", "hidden layers per member", [](C& c) -> int& { return c.dynamics.hidden_layers; }),
        int_entry("dynamics.hidden_units", "units per hidden layer", [](C& c) -> int& { return c.dynamics.hidden_units; }),
        int_entry("dynamics.batches", "training mini-batches per member", [](C& c) -> int& { return c.dynamics.batches; }),
        int_entry("dynamics.batch_size", "transitions per mini-batch", [](C& c) -> int& { return c.dynamics.batch_size; }),
        real_entry("dynamics.learning_rate", "Adam learning rate", [](C& c) -> double& { return c.dynamics.learning_rate; }),
        int_entry("dynamics.transitions", "random-policy transitions collected for training",
                  [](C& c) -> int& { return c.dynamics.transitions; }),
        {{"dynamics.checkpoint", "path", "pre-trained ensemble (empty = train inline when needed)"},
         [](C& c, std::string_view v) { c.dynamics_checkpoint = std::string(v); },
         [](const C& c) { return c.dynamics_checkpoint; }},
        int_entry("eval.episodes", "evaluation rollouts per policy", [](C& c) -> int& { return c.eval.episodes; }),
        int_entry("eval.dataset_size", "trajectories in the common evaluation dataset",
                  [](C& c) -> int& { return c.eval.dataset_size; }),
        real_entry("eval.action_noise", "probability of a random action in the evaluation dataset",
                   [](C& c) -> double& { return c.eval.action_noise; }),
        u64_entry("eval.seed", "seed of the evaluation episodes and dataset", [](C& c) -> std::uint64_t& { return c.eval.seed; }),
    };
    return table;
}

const Entry& find(std::string_view key) {
    for (const auto& e : entries()) {
        if (e.meta.key == key) return e;
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) out.push_back(e.meta);
        return out;
    }();
    return keys;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    find(key).set(cfg, trim(value));
}

std::string get_config_value(const ExperimentConfig& cfg, std::string_view key) { return find(key).get(cfg); }

ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
            section = trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = trim(body.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        set_config_value(base, key, body.substr(eq + 1));
    }
    return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), std::move(base));
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& e : entries()) out += e.meta.key + " = " + e.get(cfg) + "\n";
    return out;
}

std::string config_help_text() {
    const ExperimentConfig defaults;
    std::string out = "Config keys (set in a --config file or with --set key=value):\n";
    for (const auto& e : entries()) {
        out += "  " + e.meta.key + " <" + e.meta.type + "> = " + e.get(defaults) + "\n      " + e.meta.help + "\n";
    }
    return out;
}

}  // namespace jetpref
