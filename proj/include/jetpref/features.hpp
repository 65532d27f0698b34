#pragma once

#include "jetpref/flightsim.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace jetpref {

inline constexpr std::size_t kNumFeatures = 30;

/// Transition features in canonical order; see feature_names().
using FeatureVector = std::array<double, kNumFeatures>;

enum Feature : std::size_t {
    kDist = 0,
    kClosingSpeed,
    kAlt,
    kAltError,
    kDeltaAltError,
    kDistHor,
    kDeltaDistHor,
    kPitchError,
    kDeltaPitchError,
    kAbsRoll,
    kRollError,
    kDeltaRollError,
    kHdgError,
    kDeltaHdgError,
    kFwdError,
    kDeltaFwdError,
    kUpError,
    kDeltaUpError,
    kRightError,
    kDeltaRightError,
    kLosError,
    kDeltaLosError,
    kAbsLrOffset,
    kSpeed,
    kGForce,
    kPitchRate,
    kRollRate,
    kYawRate,
    kThrust,
    kDeltaThrust,
};

/// Lower-case, space-separated names, e.g. "closing speed".
const std::array<std::string_view, kNumFeatures>& feature_names();
/// Index for a canonical name; throws InputError if unknown.
std::size_t feature_index(std::string_view name);
/// Stable hex digest of the ordered name list; stamped into every file format.
std::string feature_schema_hash();

/// Features of the transition (s, a, s_next). Non-delta, non-rate features are
/// measured on s_next. Throws InputError unless s_next.t == s.t + 1.
FeatureVector phi(const WorldState& s, const Action& a, const WorldState& s_next);

}  // namespace jetpref
