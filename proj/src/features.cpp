#include "jetpref/features.hpp"

#include "jetpref/error.hpp"
#include "jetpref/rng.hpp"
#include "jetpref/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace jetpref {

const std::array<std::string_view, kNumFeatures>& feature_names() {
    static constexpr std::array<std::string_view, kNumFeatures> names{
        "dist",          "closing speed",     "alt",           "alt error",         "delta alt error",
        "dist hor",      "delta dist hor",    "pitch error",   "delta pitch error", "abs roll",
        "roll error",    "delta roll error",  "hdg error",     "delta hdg error",   "fwd error",
        "delta fwd error", "up error",        "delta up error", "right error",      "delta right error",
        "los error",     "delta los error",   "abs lr offset", "speed",             "g force",
        "pitch rate",    "roll rate",         "yaw rate",      "thrust",            "delta thrust",
    };
    return names;
}

std::size_t feature_index(std::string_view name) {
    const auto& names = feature_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("unknown feature '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names.begin());
}

std::string feature_schema_hash() {
    std::string joined;
    for (auto n : feature_names()) {
        joined += n;
        joined += '\n';
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(joined)));
    return buf;
}

namespace {

double angle_between(const Vec3& a, const Vec3& b) {
    const double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0));
}

// Features that are functions of a single state; deltas are differences of these.
struct Snapshot {
    double dist, alt_error, dist_hor, pitch_error, roll_error, hdg_error;
    double fwd_error, up_error, right_error, los_error;
};

Snapshot snapshot(const WorldState& w) {
    const AircraftState& ej = w.ej;
    const AircraftState& rj = w.rj;
    const BodyAxes ea = ej.axes();
    const BodyAxes ra = rj.axes();
    const Vec3 rel = rj.position - ej.position;
    Snapshot s{};
    s.dist = rel.norm();
    s.alt_error = ej.position.z() - rj.position.z();
    s.dist_hor = std::hypot(rel.x(), rel.y());
    s.pitch_error = std::abs(ej.pitch - rj.pitch);
    s.roll_error = std::abs(wrap_angle(ej.roll - rj.roll));
    s.hdg_error = std::abs(wrap_angle(ej.yaw - rj.yaw));
    s.fwd_error = angle_between(ea.forward, ra.forward);
    s.up_error = angle_between(ea.up, ra.up);
    s.right_error = angle_between(ea.right, ra.right);
    s.los_error = angle_between(ea.forward, rel);
    return s;
}

}  // namespace

FeatureVector phi(const WorldState& s, const Action& a, const WorldState& s_next) {
    if (s_next.t != s.t + 1) throw InputError("phi: states are not consecutive");
    (void)a;  // the action acts through s_next; thrust is read from the state
    const Snapshot p = snapshot(s);
    const Snapshot q = snapshot(s_next);
    const AircraftState& ej = s_next.ej;
    const AircraftState& ej0 = s.ej;
    const BodyAxes ra = s_next.rj.axes();

    FeatureVector x{};
    x[kDist] = q.dist;
    x[kClosingSpeed] = (q.dist - p.dist) / sim::kDt;
    x[kAlt] = ej.position.z();
    x[kAltError] = q.alt_error;
    x[kDeltaAltError] = q.alt_error - p.alt_error;
    x[kDistHor] = q.dist_hor;
    x[kDeltaDistHor] = q.dist_hor - p.dist_hor;
    x[kPitchError] = q.pitch_error;
    x[kDeltaPitchError] = q.pitch_error - p.pitch_error;
    x[kAbsRoll] = std::abs(ej.roll);
    x[kRollError] = q.roll_error;
    x[kDeltaRollError] = q.roll_error - p.roll_error;
    x[kHdgError] = q.hdg_error;
    x[kDeltaHdgError] = q.hdg_error - p.hdg_error;
    x[kFwdError] = q.fwd_error;
    x[kDeltaFwdError] = q.fwd_error - p.fwd_error;
    x[kUpError] = q.up_error;
    x[kDeltaUpError] = q.up_error - p.up_error;
    x[kRightError] = q.right_error;
    x[kDeltaRightError] = q.right_error - p.right_error;
    x[kLosError] = q.los_error;
    x[kDeltaLosError] = q.los_error - p.los_error;
    x[kAbsLrOffset] = std::abs((s_next.rj.position - ej.position).dot(ra.right));
    x[kSpeed] = ej.speed;
    const Vec3 accel = (ej.velocity - ej0.velocity) / sim::kDt;
    x[kGForce] = (accel - Vec3(0.0, 0.0, -sim::kGravity)).norm() / sim::kGravity;
    x[kPitchRate] = std::abs(ej.pitch - ej0.pitch) / sim::kDt;
    x[kRollRate] = std::abs(wrap_angle(ej.roll - ej0.roll)) / sim::kDt;
    x[kYawRate] = std::abs(wrap_angle(ej.yaw - ej0.yaw)) / sim::kDt;
    x[kThrust] = ej.thrust;
    x[kDeltaThrust] = std::abs(ej.thrust - ej0.thrust);
    return x;
}

std::string_view provenance_name(Provenance p) {
    switch (p) {
        case Provenance::OnlineAgent: return "online-agent";
        case Provenance::OracleEval: return "oracle-eval";
        case Provenance::Random: return "random";
    }
    return "unknown";
}

Provenance parse_provenance(std::string_view name) {
    if (name == "online-agent") return Provenance::OnlineAgent;
    if (name == "oracle-eval") return Provenance::OracleEval;
    if (name == "random") return Provenance::Random;
    throw InputError("unknown provenance '" + std::string(name) + "'");
}

Trajectory rollout(const Policy& policy, Task task, std::uint64_t seed, Provenance provenance) {
    Trajectory traj;
    traj.task = task;
    traj.provenance = provenance;
    WorldState w = reset(task, seed);
    while (!is_terminal(w)) {
        const Action a = policy(w).clamped();
        WorldState next = step(w, a);
        traj.transitions.push_back({w, a, next, phi(w, a, next)});
        w = std::move(next);
    }
    return traj;
}

Action random_action(std::uint64_t seed, int t) {
    const auto base = static_cast<std::uint64_t>(t) * 4u;
    return {2.0 * hashed_uniform(seed, base) - 1.0, 2.0 * hashed_uniform(seed, base + 1) - 1.0,
            2.0 * hashed_uniform(seed, base + 2) - 1.0, hashed_uniform(seed, base + 3)};
}

}  // namespace jetpref
