#include "jetpref/dynamics.hpp"

#include "jetpref/error.hpp"
#include "jetpref/rng.hpp"
#include "jetpref/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace jetpref {

namespace {

void put_attitude(Eigen::Ref<Eigen::VectorXd> v, Eigen::Index at, const AircraftState& a) {
    v(at + 0) = std::sin(a.roll);
    v(at + 1) = std::cos(a.roll);
    v(at + 2) = std::sin(a.pitch);
    v(at + 3) = std::cos(a.pitch);
    v(at + 4) = std::sin(a.yaw);
    v(at + 5) = std::cos(a.yaw);
    v(at + 6) = a.speed;
}

void put_delta(Eigen::Ref<Eigen::VectorXd> d, Eigen::Index at, const AircraftState& a, const AircraftState& b) {
    d.segment<3>(at) = b.position - a.position;
    d(at + 3) = wrap_angle(b.roll - a.roll);
    d(at + 4) = b.pitch - a.pitch;
    d(at + 5) = wrap_angle(b.yaw - a.yaw);
    d(at + 6) = b.speed - a.speed;
}

AircraftState shifted(const AircraftState& a, const Eigen::Ref<const Eigen::VectorXd>& d, Eigen::Index at,
                      double speed_lo, double speed_hi) {
    AircraftState b = a;
    b.prev_velocity = a.velocity;
    b.prev_thrust = a.thrust;
    b.position = a.position + d.segment<3>(at);
    b.roll = wrap_angle(a.roll + d(at + 3));
    b.pitch = std::clamp(a.pitch + d(at + 4), -sim::kPi / 2, sim::kPi / 2);
    b.yaw = wrap_angle(a.yaw + d(at + 5));
    b.speed = std::clamp(a.speed + d(at + 6), speed_lo, speed_hi);
    b.sync_velocity();
    return b;
}

}  // namespace

Eigen::VectorXd dynamics_input(const WorldState& w, const Action& a) {
    const Action u = a.clamped();
    Eigen::VectorXd v(kDynamicsInputDim);
    v.segment<3>(0) = w.rj.position - w.ej.position;
    put_attitude(v, 3, w.ej);
    put_attitude(v, 10, w.rj);
    v(17) = w.rj.position.z();
    v(18) = u.pitch;
    v(19) = u.roll;
    v(20) = u.yaw;
    v(21) = u.thrust;
    return v;
}

Eigen::VectorXd dynamics_delta(const WorldState& s, const WorldState& s_next) {
    Eigen::VectorXd d(kDynamicsOutputDim);
    put_delta(d, 0, s.ej, s_next.ej);
    put_delta(d, 7, s.rj, s_next.rj);
    return d;
}

WorldState apply_dynamics_delta(const WorldState& w, const Action& a, const Eigen::Ref<const Eigen::VectorXd>& delta) {
    if (delta.size() != kDynamicsOutputDim) throw InputError("dynamics delta has the wrong dimension");
    const Action u = a.clamped();
    WorldState next = w;
    next.ej = shifted(w.ej, delta, 0, sim::kSpeedMin, sim::kSpeedMax);
    next.ej.thrust = u.thrust;
    // The static Land RJ has speed 0, so RJ speed is only bounded above.
    next.rj = shifted(w.rj, delta, 7, 0.0, sim::kSpeedMax);
    next.t = w.t + 1;
    return next;
}

std::vector<TransitionSample> collect_random_transitions(Task task, int n, std::uint64_t seed) {
    std::vector<TransitionSample> out;
    out.reserve(static_cast<std::size_t>(std::max(n, 0)));
    for (std::uint64_t ep = 0; static_cast<int>(out.size()) < n; ++ep) {
        const std::uint64_t action_seed = derive_seed(seed, "dyn-data-action", ep);
        const Trajectory traj = rollout([&](const WorldState& w) { return random_action(action_seed, w.t); }, task,
                                        derive_seed(seed, "dyn-data-episode", ep), Provenance::Random);
        for (const auto& tr : traj.transitions) {
            if (static_cast<int>(out.size()) == n) break;
            out.push_back({tr.state, tr.action, tr.next});
        }
    }
    return out;
}

void DynamicsConfig::validate() const {
    if (members < 1) throw ConfigError("dynamics.members must be >= 1");
    if (hidden_layers < 0) throw ConfigError("dynamics.hidden_layers must be >= 0");
    if (hidden_units < 1) throw ConfigError("dynamics.hidden_units must be >= 1");
    if (batches < 0) throw ConfigError("dynamics.batches must be >= 0");
    if (batch_size < 1) throw ConfigError("dynamics.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("dynamics.learning_rate must be > 0");
    if (transitions < 1) throw ConfigError("dynamics.transitions must be >= 1");
}

DynamicsEnsemble DynamicsEnsemble::from_parts(Task task, std::vector<MLP> nets, Standardizer in_norm,
                                              Standardizer out_norm) {
    if (nets.empty()) throw InputError("an ensemble needs at least one member");
    for (const auto& n : nets) {
        if (n.input_dim() != in_norm.mean.size() || n.output_dim() != out_norm.mean.size()) {
            throw InputError("ensemble member does not match the normalization sizes");
        }
    }
    DynamicsEnsemble e;
    e.task_ = task;
    e.nets_ = std::move(nets);
    e.in_norm_ = std::move(in_norm);
    e.out_norm_ = std::move(out_norm);
    e.loss_history_.assign(e.nets_.size(), {});
    return e;
}

DynamicsEnsemble DynamicsEnsemble::fit(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                       const Eigen::Ref<const Eigen::MatrixXd>& targets, const DynamicsConfig& cfg,
                                       Task task) {
    cfg.validate();
    const Eigen::Index n = inputs.cols();
    if (n == 0) throw TrainingError("dynamics training needs at least one transition");
    if (targets.cols() != n) throw InputError("inputs and targets differ in sample count");
    Standardizer in_norm = Standardizer::fit(inputs);
    Standardizer out_norm = Standardizer::fit(targets);
    const Eigen::MatrixXd x = in_norm.apply(inputs);
    const Eigen::MatrixXd y = out_norm.apply(targets);

    std::vector<int> sizes{static_cast<int>(inputs.rows())};
    for (int k = 0; k < cfg.hidden_layers; ++k) sizes.push_back(cfg.hidden_units);
    sizes.push_back(static_cast<int>(targets.rows()));

    std::vector<MLP> nets;
    std::vector<std::vector<double>> history;
    Eigen::MatrixXd bx(inputs.rows(), cfg.batch_size);
    Eigen::MatrixXd by(targets.rows(), cfg.batch_size);
    for (int m = 0; m < cfg.members; ++m) {
        MLP net = MLP::random(sizes, derive_seed(cfg.seed, "dyn-init", static_cast<std::uint64_t>(m)));
        AdamState adam(net.num_params(), cfg.learning_rate);
        std::mt19937_64 rng(derive_seed(cfg.seed, "dyn-batches", static_cast<std::uint64_t>(m)));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Eigen::VectorXd grad(net.num_params());
        std::vector<double> losses;
        double window = 0.0;
        for (int b = 0; b < cfg.batches; ++b) {
            for (int k = 0; k < cfg.batch_size; ++k) {
                const Eigen::Index c = pick(rng);
                bx.col(k) = x.col(c);
                by.col(k) = y.col(c);
            }
            window += mse_loss(net, bx, by, grad);
            adam.apply(net.params(), grad);
            if ((b + 1) % 100 == 0) {
                losses.push_back(window / 100.0);
                window = 0.0;
            }
        }
        nets.push_back(std::move(net));
        history.push_back(std::move(losses));
    }
    DynamicsEnsemble e = from_parts(task, std::move(nets), std::move(in_norm), std::move(out_norm));
    e.loss_history_ = std::move(history);
    return e;
}

DynamicsEnsemble DynamicsEnsemble::train(std::span<const TransitionSample> data, const DynamicsConfig& cfg) {
    if (data.empty()) throw TrainingError("dynamics training needs at least one transition");
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd inputs(kDynamicsInputDim, n);
    Eigen::MatrixXd targets(kDynamicsOutputDim, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& d = data[static_cast<std::size_t>(c)];
        inputs.col(c) = dynamics_input(d.state, d.action);
        targets.col(c) = dynamics_delta(d.state, d.next);
    }
    return fit(inputs, targets, cfg, data.front().state.task);
}

Eigen::MatrixXd DynamicsEnsemble::predict_delta(int member, const Eigen::Ref<const Eigen::MatrixXd>& inputs) const {
    if (member < 0 || member >= members()) throw InputError("ensemble member index out of range");
    return out_norm_.invert(nets_[static_cast<std::size_t>(member)].forward(in_norm_.apply(inputs)));
}

WorldState DynamicsEnsemble::predict(const WorldState& s, const Action& a, int member) const {
    WorldState out;
    predict_batch(member, std::span<const WorldState>(&s, 1), std::span<const Action>(&a, 1),
                  std::span<WorldState>(&out, 1));
    return out;
}

void DynamicsEnsemble::predict_batch(int member, std::span<const WorldState> s, std::span<const Action> a,
                                     std::span<WorldState> out) const {
    if (member < 0 || member >= members()) throw InputError("ensemble member index out of range");
    if (s.size() != a.size() || s.size() != out.size()) throw InputError("predict_batch: size mismatch");
    if (in_norm_.mean.size() != kDynamicsInputDim || out_norm_.mean.size() != kDynamicsOutputDim) {
        throw InputError("ensemble was not trained on flight states");
    }
    if (s.empty()) return;
    Eigen::MatrixXd in(kDynamicsInputDim, static_cast<Eigen::Index>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) in.col(static_cast<Eigen::Index>(k)) = dynamics_input(s[k], a[k]);
    const Eigen::MatrixXd delta = predict_delta(member, in);
    for (std::size_t k = 0; k < s.size(); ++k) {
        out[k] = apply_dynamics_delta(s[k], a[k], delta.col(static_cast<Eigen::Index>(k)));
    }
}

double DynamicsEnsemble::mse(std::span<const TransitionSample> data, int member) const {
    if (member < 0 || member >= members()) throw InputError("ensemble member index out of range");
    if (data.empty()) throw InputError("mse over an empty dataset");
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd in(kDynamicsInputDim, n), target(kDynamicsOutputDim, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& d = data[static_cast<std::size_t>(c)];
        in.col(c) = dynamics_input(d.state, d.action);
        target.col(c) = dynamics_delta(d.state, d.next);
    }
    const Eigen::MatrixXd pred = nets_[static_cast<std::size_t>(member)].forward(in_norm_.apply(in));
    return (pred - out_norm_.apply(target)).squaredNorm() / static_cast<double>(n);
}

Json DynamicsEnsemble::to_json() const {
    Json nets = Json::array();
    for (const auto& n : nets_) nets.push_back(n.to_json());
    return Json{{"format", "jetpref-dynamics"},
                {"version", kFormatVersion},
                {"task", task_name(task_)},
                {"input_norm", in_norm_.to_json()},
                {"output_norm", out_norm_.to_json()},
                {"members", nets}};
}

DynamicsEnsemble DynamicsEnsemble::from_json(const Json& j) {
    if (j.value("format", "") != "jetpref-dynamics") throw InputError("not a dynamics checkpoint");
    if (j.at("version").get<int>() != kFormatVersion) throw InputError("unsupported dynamics checkpoint version");
    std::vector<MLP> nets;
    for (const auto& n : j.at("members")) nets.push_back(MLP::from_json(n));
    return from_parts(parse_task(j.at("task").get<std::string>()), std::move(nets),
                      Standardizer::from_json(j.at("input_norm")), Standardizer::from_json(j.at("output_norm")));
}

void DynamicsEnsemble::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json().dump() << '\n';
}

DynamicsEnsemble DynamicsEnsemble::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    return from_json(Json::parse(in));
}

}  // namespace jetpref
