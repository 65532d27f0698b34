#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace jetpref {

using Vec3 = Eigen::Vector3d;

enum class Task { Follow, Chase, Land };

std::string_view task_name(Task task);
/// Parses "follow" / "chase" / "land" (case-insensitive). Throws ConfigError.
Task parse_task(std::string_view name);
int episode_limit(Task task);

namespace sim {

inline constexpr double kDt = 1.0;
inline constexpr int kSubSteps = 10;
inline constexpr double kGravity = 9.81;
inline constexpr double kAccelMax = 20.0;
inline constexpr double kDrag = 0.004;
inline constexpr double kSpeedMin = 20.0;
inline constexpr double kSpeedMax = 120.0;
inline constexpr double kRollRateMax = 1.5;
inline constexpr double kPitchRateMax = 0.6;
inline constexpr double kYawRateMax = 0.3;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Chase RJ: first-order smoothing of its random demands, and the altitude
/// below which it is forced to climb.
inline constexpr double kChaseSmoothing = 0.8;
inline constexpr double kChaseFloor = 100.0;

}  // namespace sim

/// Wraps to (-pi, pi].
double wrap_angle(double a);

/// Orthonormal body axes for an attitude. z is up; yaw = 0 faces +x.
struct BodyAxes {
    Vec3 forward;
    Vec3 right;
    Vec3 up;
};

BodyAxes body_axes(double roll, double pitch, double yaw);
/// Inverse of body_axes given forward and up (roll, pitch, yaw).
std::array<double, 3> attitude_from_axes(const Vec3& forward, const Vec3& up);

struct AircraftState {
    Vec3 position = Vec3::Zero();
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    double speed = 0.0;
    Vec3 velocity = Vec3::Zero();
    Vec3 prev_velocity = Vec3::Zero();
    double thrust = 0.5;
    double prev_thrust = 0.5;

    BodyAxes axes() const { return body_axes(roll, pitch, yaw); }
    /// Recomputes velocity from speed and attitude.
    void sync_velocity();

    bool operator==(const AircraftState&) const = default;
};

/// Seeded state of the scripted RJ controller. Noise is counter-based so the
/// whole controller is a small copyable value.
struct RjController {
    std::uint64_t key = 0;
    std::array<double, 3> demand{0.0, 0.0, 0.0};  // pitch, roll, yaw

    bool operator==(const RjController&) const = default;
};

struct WorldState {
    AircraftState ej;
    AircraftState rj;
    int t = 0;
    Task task = Task::Follow;
    RjController rj_controller;

    bool operator==(const WorldState&) const = default;
};

struct Action {
    double pitch = 0.0;
    double roll = 0.0;
    double yaw = 0.0;
    double thrust = 0.5;

    /// Clamps every component into range. Throws InputError if any is non-finite.
    Action clamped() const;
    bool operator==(const Action&) const = default;
};

WorldState reset(Task task, std::uint64_t seed);

/// One 1 s control step. Throws StateError on terminal states, InputError on
/// non-finite actions.
WorldState step(const WorldState& w, const Action& a);

/// step() without the terminal check; planners roll models past the episode
/// limit. The action is clamped.
WorldState advance(const WorldState& w, const Action& a);

bool is_terminal(const WorldState& w);
/// Land only: EJ has passed RJ along the runway axis.
bool passed_threshold(const WorldState& w);

using Policy = std::function<Action(const WorldState&)>;

}  // namespace jetpref
