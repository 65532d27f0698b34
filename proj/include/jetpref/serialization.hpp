#pragma once

#include "jetpref/trajectory.hpp"

#include <json.hpp>

#include <iosfwd>

namespace jetpref {

using Json = nlohmann::json;

Json to_json(const AircraftState& a);
Json to_json(const WorldState& w);
Json to_json(const Action& a);
Json to_json(const Trajectory& traj);

AircraftState aircraft_from_json(const Json& j);
WorldState world_from_json(const Json& j);
Action action_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);

/// Object keyed by canonical feature names.
Json features_to_json(const FeatureVector& x);

/// Line-delimited export: one JSON record per transition with fields
/// traj, t, ej, rj, action, features (keyed by feature name).
void export_transitions(const Trajectory& traj, std::ostream& out);

}  // namespace jetpref
