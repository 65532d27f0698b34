#include "jetpref/prefgraph.hpp"

#include "jetpref/error.hpp"
#include "jetpref/features.hpp"
#include "jetpref/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

namespace jetpref {

std::string_view label_source_name(LabelSource s) { return s == LabelSource::Human ? "human" : "oracle"; }

int PreferenceGraph::add_trajectory(Trajectory traj) {
    if (traj.transitions.empty()) throw InputError("cannot add an empty trajectory");
    traj.id = num_trajectories();
    traj.task = task_;
    trajectories_.push_back(std::move(traj));
    return trajectories_.back().id;
}

void PreferenceGraph::add_preference(int i, int j, LabelSource source, std::int64_t timestamp) {
    if (i == j) throw InputError("self-preference " + std::to_string(i));
    if (!contains(i) || !contains(j)) {
        throw InputError("preference (" + std::to_string(i) + ", " + std::to_string(j) + ") references unknown id");
    }
    if (!edge_keys_.insert(key(i, j)).second) {
        throw InputError("duplicate preference (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    edges_.push_back({i, j, source, timestamp});
}

bool PreferenceGraph::has_edge(int i, int j) const { return edge_keys_.count(key(i, j)) != 0; }

bool PreferenceGraph::compared(int a, int b) const { return has_edge(a, b) || has_edge(b, a); }

const Trajectory& PreferenceGraph::trajectory(int id) const {
    if (!contains(id)) throw InputError("unknown trajectory id " + std::to_string(id));
    return trajectories_[static_cast<std::size_t>(id)];
}

std::vector<std::pair<int, int>> PreferenceGraph::sample_queries(int new_id, int k_batch, std::uint64_t seed) const {
    if (!contains(new_id)) throw InputError("unknown trajectory id " + std::to_string(new_id));
    std::vector<int> pool;
    for (int id = 0; id < num_trajectories(); ++id) {
        if (id != new_id && !compared(id, new_id)) pool.push_back(id);
    }
    const auto k = static_cast<std::size_t>(std::max(0, std::min<int>(k_batch, static_cast<int>(pool.size()))));
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates.
    for (std::size_t a = 0; a < k; ++a) {
        std::uniform_int_distribution<std::size_t> pick(a, pool.size() - 1);
        std::swap(pool[a], pool[pick(rng)]);
    }
    std::vector<std::pair<int, int>> out;
    out.reserve(k);
    for (std::size_t a = 0; a < k; ++a) out.emplace_back(pool[a], new_id);
    return out;
}

void PreferenceGraph::save(std::ostream& out) const {
    const Json header{{"format", "jetpref-graph"},
                      {"version", kFormatVersion},
                      {"task", task_name(task_)},
                      {"schema_hash", feature_schema_hash()},
                      {"trajectories", num_trajectories()},
                      {"edges", num_edges()}};
    out << header.dump() << '\n';
    for (const auto& t : trajectories_) {
        Json rec = to_json(t);
        rec["type"] = "trajectory";
        out << rec.dump() << '\n';
    }
    for (const auto& e : edges_) {
        const Json rec{{"type", "edge"},
                       {"i", e.i},
                       {"j", e.j},
                       {"source", label_source_name(e.source)},
                       {"timestamp", e.timestamp}};
        out << rec.dump() << '\n';
    }
}

PreferenceGraph PreferenceGraph::load(std::istream& in) {
    try {
        return load_records(in);
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed graph file: ") + e.what());
    }
}

PreferenceGraph PreferenceGraph::load_records(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty graph file");
    const Json header = Json::parse(line);
    if (header.value("format", "") != "jetpref-graph") throw InputError("not a graph file");
    if (header.at("version").get<int>() != kFormatVersion) throw InputError("unsupported graph file version");
    if (header.at("schema_hash").get<std::string>() != feature_schema_hash()) {
        throw InputError("graph file feature schema does not match");
    }
    PreferenceGraph g(parse_task(header.at("task").get<std::string>()));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json rec = Json::parse(line);
        const std::string type = rec.at("type").get<std::string>();
        if (type == "trajectory") {
            Trajectory t = trajectory_from_json(rec);
            const int expected = t.id;
            if (g.add_trajectory(std::move(t)) != expected) throw InputError("trajectory ids are not sequential");
        } else if (type == "edge") {
            const auto source = rec.at("source").get<std::string>() == "human" ? LabelSource::Human : LabelSource::Oracle;
            g.add_preference(rec.at("i").get<int>(), rec.at("j").get<int>(), source,
                             rec.at("timestamp").get<std::int64_t>());
        } else {
            throw InputError("unknown graph record type '" + type + "'");
        }
    }
    return g;
}

void PreferenceGraph::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    save(out);
}

PreferenceGraph PreferenceGraph::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    return load(in);
}

namespace {

double prediction(std::span<const double> predicted, int id) {
    if (id < 0 || static_cast<std::size_t>(id) >= predicted.size() || std::isnan(predicted[static_cast<std::size_t>(id)])) {
        throw InputError("missing predicted return for trajectory " + std::to_string(id));
    }
    return predicted[static_cast<std::size_t>(id)];
}

}  // namespace

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

ZeroOneLoss loss_0_1(const PreferenceGraph& g, std::span<const double> predicted_returns, double tie_tolerance) {
    ZeroOneLoss loss;
    for (const auto& e : g.edges()) {
        if (mispredicted(prediction(predicted_returns, e.i), prediction(predicted_returns, e.j), tie_tolerance)) {
            ++loss.count;
        }
    }
    loss.fraction = g.num_edges() == 0 ? 0.0 : static_cast<double>(loss.count) / g.num_edges();
    return loss;
}

double loss_nll(const PreferenceGraph& g, std::span<const double> predicted_returns) {
    double total = 0.0;
    for (const auto& e : g.edges()) {
        // -log(1 / (1 + exp(g_i - g_j)))
        total += softplus(prediction(predicted_returns, e.i) - prediction(predicted_returns, e.j));
    }
    return total;
}

}  // namespace jetpref
