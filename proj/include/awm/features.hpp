#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "awm/dynamics.hpp"
#include "awm/scenario.hpp"
#include "awm/tape.hpp"

namespace awm {

enum class RouteConditioning { kNone = 0, kHeading = 1, kWaypoint = 2 };

const char* route_conditioning_name(RouteConditioning m);
bool route_conditioning_from_name(const std::string& name, RouteConditioning* out);

inline constexpr int kRoadPoints = 8;
inline constexpr int kAgentSlots = 4;
// ego speed (1) + goal slot (1) + road points (2 each) + agents (pos+vel, 4 each)
inline constexpr int kFeatureDim = 2 + 2 * kRoadPoints + 4 * kAgentSlots;

// Fixed-length ego-frame observation. Padded slots stay zero and are
// reported invalid in the masks; the masks are not part of the network
// input.
struct FeatureVector {
  std::array<double, kFeatureDim> values{};
  std::array<std::uint8_t, kRoadPoints> road_mask{};
  std::array<std::uint8_t, kAgentSlots> agent_mask{};
};

// Snapshot of the scenario at step t around the given ego state: the
// K nearest roadgraph points and M nearest agents (ties broken by lowest
// index), the goal, and the conditioning mode. The selection is frozen
// here so the VJP replays exactly the forward branch.
EncodeContext build_encode_context(const Scenario& scenario, int t, const VehicleState& ego,
                                   RouteConditioning mode, double dt);

FeatureVector compute_features(const EncodeContext& ctx, const VehicleState& ego);

// upstream has kFeatureDim entries; returns d(features)/d(state)^T * upstream.
StateVec features_vjp(const EncodeContext& ctx, const VehicleState& ego,
                      std::span<const double> upstream);

}  // namespace awm
