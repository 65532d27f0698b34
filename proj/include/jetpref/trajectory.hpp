#pragma once

#include "jetpref/features.hpp"
#include "jetpref/flightsim.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace jetpref {

enum class Provenance { OnlineAgent, OracleEval, Random };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view name);

struct Transition {
    WorldState state;
    Action action;
    WorldState next;
    FeatureVector x{};
};

struct Trajectory {
    int id = -1;
    Task task = Task::Follow;
    Provenance provenance = Provenance::OnlineAgent;
    std::vector<Transition> transitions;

    int length() const { return static_cast<int>(transitions.size()); }
};

/// Runs policy from reset(task, seed) until is_terminal.
Trajectory rollout(const Policy& policy, Task task, std::uint64_t seed,
                   Provenance provenance = Provenance::OnlineAgent);

/// Uniform random actions drawn from (seed, t).
Action random_action(std::uint64_t seed, int t);

}  // namespace jetpref
