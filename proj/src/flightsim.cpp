#include "jetpref/flightsim.hpp"

#include "jetpref/error.hpp"
#include "jetpref/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace jetpref {

std::string_view task_name(Task task) {
    switch (task) {
        case Task::Follow: return "follow";
        case Task::Chase: return "chase";
        case Task::Land: return "land";
    }
    return "unknown";
}

Task parse_task(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "follow") return Task::Follow;
    if (lower == "chase") return Task::Chase;
    if (lower == "land") return Task::Land;
    throw ConfigError("unknown task '" + std::string(name) + "' (expected follow, chase or land)");
}

int episode_limit(Task task) { return task == Task::Land ? 25 : 20; }

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * sim::kPi);
    if (a <= -sim::kPi) a += 2.0 * sim::kPi;
    return a;
}

BodyAxes body_axes(double roll, double pitch, double yaw) {
    const double cr = std::cos(roll), sr = std::sin(roll);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const Vec3 forward(cp * cy, cp * sy, sp);
    const Vec3 right0(sy, -cy, 0.0);
    const Vec3 up0(-sp * cy, -sp * sy, cp);
    return {forward, cr * right0 - sr * up0, cr * up0 + sr * right0};
}

std::array<double, 3> attitude_from_axes(const Vec3& forward, const Vec3& up) {
    const double pitch = std::asin(std::clamp(forward.z(), -1.0, 1.0));
    const double yaw = std::atan2(forward.y(), forward.x());
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const Vec3 right0(sy, -cy, 0.0);
    const Vec3 up0(-sp * cy, -sp * sy, cp);
    const double roll = std::atan2(up.dot(right0), up.dot(up0));
    return {roll, pitch, yaw};
}

void AircraftState::sync_velocity() { velocity = speed * axes().forward; }

Action Action::clamped() const {
    if (!std::isfinite(pitch) || !std::isfinite(roll) || !std::isfinite(yaw) || !std::isfinite(thrust)) {
        throw InputError("action has non-finite components");
    }
    return {std::clamp(pitch, -1.0, 1.0), std::clamp(roll, -1.0, 1.0), std::clamp(yaw, -1.0, 1.0),
            std::clamp(thrust, 0.0, 1.0)};
}

namespace {

AircraftState make_aircraft(const Vec3& position, double roll, double pitch, double yaw, double speed) {
    AircraftState a;
    a.position = position;
    a.roll = wrap_angle(roll);
    a.pitch = std::clamp(pitch, -sim::kPi / 2, sim::kPi / 2);
    a.yaw = wrap_angle(yaw);
    a.speed = speed;
    a.sync_velocity();
    a.prev_velocity = a.velocity;
    return a;
}

// Point-mass-on-rails integration of one control step.
void integrate(AircraftState& a, const Action& u) {
    constexpr double h = sim::kDt / sim::kSubSteps;
    a.prev_velocity = a.velocity;
    a.prev_thrust = a.thrust;
    a.thrust = u.thrust;
    for (int k = 0; k < sim::kSubSteps; ++k) {
        a.roll = wrap_angle(a.roll + u.roll * sim::kRollRateMax * h);
        a.pitch = std::clamp(a.pitch + u.pitch * sim::kPitchRateMax * h, -sim::kPi / 2, sim::kPi / 2);
        a.yaw = wrap_angle(a.yaw + u.yaw * sim::kYawRateMax * h);
        const double accel =
            u.thrust * sim::kAccelMax - sim::kDrag * a.speed * a.speed - sim::kGravity * std::sin(a.pitch);
        a.speed = std::clamp(a.speed + accel * h, sim::kSpeedMin, sim::kSpeedMax);
        a.sync_velocity();
        a.position += a.velocity * h;
        // Flat ground at z = 0: the aircraft slides along it instead of sinking.
        if (a.position.z() < 0.0) a.position.z() = 0.0;
    }
}

void advance_reference(WorldState& w) {
    AircraftState& rj = w.rj;
    switch (w.task) {
        case Task::Follow:
            rj.prev_velocity = rj.velocity;
            rj.prev_thrust = rj.thrust;
            rj.position += rj.velocity * sim::kDt;
            break;
        case Task::Chase: {
            RjController& c = w.rj_controller;
            for (std::size_t d = 0; d < 3; ++d) {
                const double u = 2.0 * hashed_uniform(c.key, static_cast<std::uint64_t>(w.t) * 3u + d) - 1.0;
                c.demand[d] = sim::kChaseSmoothing * c.demand[d] + (1.0 - sim::kChaseSmoothing) * u;
            }
            Action demand{c.demand[0], c.demand[1], c.demand[2], 0.5};
            if (rj.position.z() < sim::kChaseFloor) demand.pitch = 1.0;
            integrate(rj, demand);
            break;
        }
        case Task::Land:
            rj.prev_velocity = rj.velocity;
            rj.prev_thrust = rj.thrust;
            break;
    }
}

}  // namespace

WorldState reset(Task task, std::uint64_t seed) {
    const std::uint64_t key = derive_seed(seed, task_name(task));
    std::uint64_t counter = 0;
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * hashed_uniform(key, counter++); };

    WorldState w;
    w.task = task;
    w.t = 0;
    switch (task) {
        case Task::Follow: {
            w.rj = make_aircraft(Vec3(0.0, 0.0, 300.0), 0.0, 0.0, 0.0, 50.0);
            const double side = uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
            const double offset = side * uniform(100.0, 300.0);
            const double heading = sim::kPi + uniform(-0.2, 0.2);
            w.ej = make_aircraft(Vec3(500.0, offset, 300.0), 0.0, 0.0, heading, 50.0);
            break;
        }
        case Task::Chase: {
            const double heading = uniform(-sim::kPi, sim::kPi);
            w.ej = make_aircraft(Vec3(0.0, 0.0, 300.0), 0.0, 0.0, heading, 50.0);
            const double gap = uniform(100.0, 300.0);
            const Vec3 ahead = w.ej.axes().forward * gap;
            w.rj = make_aircraft(w.ej.position + ahead, 0.0, 0.0, heading, 50.0);
            w.rj_controller.key = derive_seed(seed, "chase-rj");
            break;
        }
        case Task::Land: {
            // RJ marks the touchdown point and never moves.
            w.rj = make_aircraft(Vec3::Zero(), 0.0, 0.05, 0.0, 0.0);
            const double x = uniform(-2000.0, -1500.0);
            const double alt = uniform(100.0, 300.0);
            const double lateral = uniform(-50.0, 50.0);
            const double roll = uniform(-0.3, 0.3);
            const double pitch = uniform(-0.1, 0.1);
            const double heading = uniform(-0.1, 0.1);
            w.ej = make_aircraft(Vec3(x, lateral, alt), roll, pitch, heading, 60.0);
            break;
        }
    }
    return w;
}

WorldState advance(const WorldState& w, const Action& a) {
    const Action u = a.clamped();
    WorldState next = w;
    integrate(next.ej, u);
    advance_reference(next);
    next.t = w.t + 1;
    return next;
}

WorldState step(const WorldState& w, const Action& a) {
    if (is_terminal(w)) throw StateError("step called on a terminal state");
    return advance(w, a);
}

bool passed_threshold(const WorldState& w) {
    return w.task == Task::Land && w.ej.position.x() >= w.rj.position.x();
}

bool is_terminal(const WorldState& w) {
    if (w.t >= episode_limit(w.task)) return true;
    return passed_threshold(w);
}

}  // namespace jetpref
