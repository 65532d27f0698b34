#include "jetpref/serialization.hpp"

#include "jetpref/error.hpp"

#include <ostream>

namespace jetpref {

namespace {

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

}  // namespace

Json to_json(const AircraftState& a) {
    return Json{{"position", vec_json(a.position)}, {"roll", a.roll},           {"pitch", a.pitch},
                {"yaw", a.yaw},                     {"speed", a.speed},         {"velocity", vec_json(a.velocity)},
                {"prev_velocity", vec_json(a.prev_velocity)}, {"thrust", a.thrust}, {"prev_thrust", a.prev_thrust}};
}

Json to_json(const WorldState& w) {
    return Json{{"t", w.t},
                {"task", task_name(w.task)},
                {"ej", to_json(w.ej)},
                {"rj", to_json(w.rj)},
                {"rj_controller", Json{{"key", w.rj_controller.key}, {"demand", w.rj_controller.demand}}}};
}

Json to_json(const Action& a) {
    return Json{{"pitch", a.pitch}, {"roll", a.roll}, {"yaw", a.yaw}, {"thrust", a.thrust}};
}

Json to_json(const Trajectory& traj) {
    Json states = Json::array();
    Json actions = Json::array();
    Json features = Json::array();
    for (const auto& tr : traj.transitions) {
        if (states.empty()) states.push_back(to_json(tr.state));
        states.push_back(to_json(tr.next));
        actions.push_back(to_json(tr.action));
        features.push_back(tr.x);
    }
    return Json{{"id", traj.id},
                {"task", task_name(traj.task)},
                {"provenance", provenance_name(traj.provenance)},
                {"states", std::move(states)},
                {"actions", std::move(actions)},
                {"features", std::move(features)}};
}

AircraftState aircraft_from_json(const Json& j) {
    AircraftState a;
    a.position = vec_from(j.at("position"));
    a.roll = j.at("roll").get<double>();
    a.pitch = j.at("pitch").get<double>();
    a.yaw = j.at("yaw").get<double>();
    a.speed = j.at("speed").get<double>();
    a.velocity = vec_from(j.at("velocity"));
    a.prev_velocity = vec_from(j.at("prev_velocity"));
    a.thrust = j.at("thrust").get<double>();
    a.prev_thrust = j.at("prev_thrust").get<double>();
    return a;
}

WorldState world_from_json(const Json& j) {
    WorldState w;
    w.t = j.at("t").get<int>();
    w.task = parse_task(j.at("task").get<std::string>());
    w.ej = aircraft_from_json(j.at("ej"));
    w.rj = aircraft_from_json(j.at("rj"));
    w.rj_controller.key = j.at("rj_controller").at("key").get<std::uint64_t>();
    w.rj_controller.demand = j.at("rj_controller").at("demand").get<std::array<double, 3>>();
    return w;
}

Action action_from_json(const Json& j) {
    return {j.at("pitch").get<double>(), j.at("roll").get<double>(), j.at("yaw").get<double>(),
            j.at("thrust").get<double>()};
}

Trajectory trajectory_from_json(const Json& j) {
    Trajectory traj;
    traj.id = j.at("id").get<int>();
    traj.task = parse_task(j.at("task").get<std::string>());
    traj.provenance = parse_provenance(j.at("provenance").get<std::string>());
    const Json& states = j.at("states");
    const Json& actions = j.at("actions");
    const Json& features = j.at("features");
    if (states.size() != actions.size() + 1 || features.size() != actions.size()) {
        throw InputError("trajectory record has inconsistent lengths");
    }
    std::vector<WorldState> ws;
    ws.reserve(states.size());
    for (const auto& s : states) ws.push_back(world_from_json(s));
    for (std::size_t t = 0; t < actions.size(); ++t) {
        traj.transitions.push_back(
            {ws[t], action_from_json(actions[t]), ws[t + 1], features[t].get<FeatureVector>()});
    }
    return traj;
}

Json features_to_json(const FeatureVector& x) {
    Json j = Json::object();
    const auto& names = feature_names();
    for (std::size_t f = 0; f < kNumFeatures; ++f) j[std::string(names[f])] = x[f];
    return j;
}

void export_transitions(const Trajectory& traj, std::ostream& out) {
    for (const auto& tr : traj.transitions) {
        const Json rec{{"traj", traj.id},
                       {"t", tr.next.t},
                       {"ej", to_json(tr.next.ej)},
                       {"rj", to_json(tr.next.rj)},
                       {"action", to_json(tr.action)},
                       {"features", features_to_json(tr.x)}};
        out << rec.dump() << '\n';
    }
}

}  // namespace jetpref
