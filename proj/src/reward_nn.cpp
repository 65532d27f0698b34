#include "jetpref/reward_nn.hpp"

#include "jetpref/error.hpp"
#include "jetpref/rng.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace jetpref {

void RewardNNConfig::validate() const {
    if (hidden_layers < 0) throw ConfigError("reward_nn.hidden_layers must be >= 0");
    if (hidden_units < 1) throw ConfigError("reward_nn.hidden_units must be >= 1");
    if (batches_per_update < 1) throw ConfigError("reward_nn.batches_per_update must be >= 1");
    if (batch_size < 1) throw ConfigError("reward_nn.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("reward_nn.learning_rate must be > 0");
}

namespace {

std::vector<int> layer_sizes(const RewardNNConfig& cfg) {
    std::vector<int> sizes{static_cast<int>(kNumFeatures)};
    for (int k = 0; k < cfg.hidden_layers; ++k) sizes.push_back(cfg.hidden_units);
    sizes.push_back(1);
    return sizes;
}

Eigen::Map<const Eigen::VectorXd> as_vector(const FeatureVector& x) {
    return {x.data(), static_cast<Eigen::Index>(kNumFeatures)};
}

}  // namespace

Standardizer feature_standardizer(Task task, int rollouts, std::uint64_t seed) {
    if (rollouts < 1) throw ConfigError("feature standardizer needs at least one rollout");
    std::vector<FeatureVector> xs;
    for (int k = 0; k < rollouts; ++k) {
        const std::uint64_t s = derive_seed(seed, "norm-rollout", static_cast<std::uint64_t>(k));
        const std::uint64_t action_seed = derive_seed(seed, "norm-action", static_cast<std::uint64_t>(k));
        const Trajectory traj = rollout([&](const WorldState& w) { return random_action(action_seed, w.t); }, task, s,
                                        Provenance::Random);
        for (const auto& tr : traj.transitions) xs.push_back(tr.x);
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(kNumFeatures), static_cast<Eigen::Index>(xs.size()));
    for (std::size_t c = 0; c < xs.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = as_vector(xs[c]);
    return Standardizer::fit(m);
}

RewardNN::RewardNN(RewardNNConfig cfg, Standardizer input_norm)
    : cfg_(cfg),
      norm_(std::move(input_norm)),
      net_(MLP::random(layer_sizes(cfg), derive_seed(cfg.seed, "reward-nn-init"))),
      adam_(net_.num_params(), cfg.learning_rate),
      rng_(derive_seed(cfg.seed, "reward-nn-batches")) {
    cfg_.validate();
    if (norm_.mean.size() != static_cast<Eigen::Index>(kNumFeatures)) {
        throw InputError("reward network normalization must cover all features");
    }
}

double RewardNN::update(const PreferenceGraph& graph) {
    if (graph.num_edges() == 0) throw TrainingError("reward network needs at least one preference");
    // Sampling over edges in (i, j) order keeps training independent of label arrival order.
    std::vector<std::pair<int, int>> pool;
    pool.reserve(static_cast<std::size_t>(graph.num_edges()));
    for (const auto& e : graph.edges()) pool.emplace_back(e.i, e.j);
    std::sort(pool.begin(), pool.end());
    std::uniform_int_distribution<int> pick(0, graph.num_edges() - 1);
    Eigen::VectorXd grad(net_.num_params());
    double total = 0.0;
    for (int b = 0; b < cfg_.batches_per_update; ++b) {
        std::unordered_map<int, int> segment_of;
        std::vector<int> order;
        std::vector<std::pair<int, int>> edges;
        auto segment = [&](int id) {
            const auto [it, inserted] = segment_of.try_emplace(id, static_cast<int>(order.size()));
            if (inserted) order.push_back(id);
            return it->second;
        };
        for (int k = 0; k < cfg_.batch_size; ++k) {
            const auto [ei, ej] = pool[static_cast<std::size_t>(pick(rng_))];
            const int si = segment(ei);
            const int sj = segment(ej);
            edges.emplace_back(si, sj);
        }
        Eigen::Index cols = 0;
        for (int id : order) cols += graph.trajectory(id).length();
        Eigen::MatrixXd x(static_cast<Eigen::Index>(kNumFeatures), cols);
        std::vector<std::pair<int, int>> segments;
        Eigen::Index c = 0;
        for (int id : order) {
            const Trajectory& traj = graph.trajectory(id);
            segments.emplace_back(static_cast<int>(c), traj.length());
            for (const auto& tr : traj.transitions) x.col(c++) = as_vector(tr.x);
        }
        total += preference_nll_loss(net_, norm_.apply(x), segments, edges, grad);
        adam_.apply(net_.params(), grad);
    }
    ++updates_;
    return total / cfg_.batches_per_update;
}

double RewardNN::reward(const FeatureVector& x) const {
    const Eigen::MatrixXd in = norm_.apply(as_vector(x));
    return net_.forward(in)(0, 0);
}

void RewardNN::reward_batch(std::span<const FeatureVector> xs, std::span<double> out) const {
    if (xs.size() != out.size()) throw InputError("reward_batch: size mismatch");
    if (xs.empty()) return;
    Eigen::Map<const Eigen::MatrixXd> m(xs.front().data(), static_cast<Eigen::Index>(kNumFeatures),
                                        static_cast<Eigen::Index>(xs.size()));
    const Eigen::MatrixXd y = net_.forward(norm_.apply(m));
    for (std::size_t k = 0; k < xs.size(); ++k) out[k] = y(0, static_cast<Eigen::Index>(k));
}

Json RewardNN::to_json() const {
    return Json{{"format", "jetpref-reward-nn"},
                {"version", kFormatVersion},
                {"schema_hash", feature_schema_hash()},
                {"config",
                 {{"hidden_layers", cfg_.hidden_layers},
                  {"hidden_units", cfg_.hidden_units},
                  {"batches_per_update", cfg_.batches_per_update},
                  {"batch_size", cfg_.batch_size},
                  {"learning_rate", cfg_.learning_rate},
                  {"seed", cfg_.seed}}},
                {"updates", updates_},
                {"input_norm", norm_.to_json()},
                {"net", net_.to_json()},
                {"optimizer", optimizer_json()}};
}

Json RewardNN::optimizer_json() const {
    std::ostringstream rng;
    rng << rng_;
    return Json{{"step", adam_.step},
                {"m", std::vector<double>(adam_.m.data(), adam_.m.data() + adam_.m.size())},
                {"v", std::vector<double>(adam_.v.data(), adam_.v.data() + adam_.v.size())},
                {"rng", rng.str()}};
}

void RewardNN::restore_optimizer(const Json& j) {
    const auto m = j.at("m").get<std::vector<double>>();
    const auto v = j.at("v").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(m.size()) != net_.num_params() ||
        static_cast<Eigen::Index>(v.size()) != net_.num_params()) {
        throw InputError("reward network optimizer state has the wrong size");
    }
    adam_.m = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    adam_.v = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    adam_.step = j.at("step").get<long>();
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> rng_;
    if (!rng) throw InputError("reward network optimizer state has a malformed generator");
}

RewardNN RewardNN::from_json(const Json& j) {
    if (j.value("format", "") != "jetpref-reward-nn") throw InputError("not a reward network checkpoint");
    if (j.at("version").get<int>() != kFormatVersion) throw InputError("unsupported reward network checkpoint version");
    if (j.at("schema_hash").get<std::string>() != feature_schema_hash()) {
        throw InputError("reward network feature schema does not match");
    }
    const Json& c = j.at("config");
    RewardNNConfig cfg;
    cfg.hidden_layers = c.at("hidden_layers").get<int>();
    cfg.hidden_units = c.at("hidden_units").get<int>();
    cfg.batches_per_update = c.at("batches_per_update").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    RewardNN model(cfg, Standardizer::from_json(j.at("input_norm")));
    MLP net = MLP::from_json(j.at("net"));
    if (net.sizes() != model.net_.sizes()) throw InputError("reward network architecture mismatch");
    model.net_ = std::move(net);
    model.updates_ = j.at("updates").get<int>();
    // Optional: checkpoints without it resume with a fresh optimizer.
    if (j.contains("optimizer")) model.restore_optimizer(j.at("optimizer"));
    return model;
}

void RewardNN::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json().dump() << '\n';
}

RewardNN RewardNN::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    return from_json(Json::parse(in));
}

}  // namespace jetpref
