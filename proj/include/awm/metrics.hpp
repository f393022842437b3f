#pragma once

#include <span>
#include <vector>

#include "awm/dynamics.hpp"
#include "awm/scenario.hpp"

namespace awm {

// Mean (over timesteps) Euclidean distance between the (x, y) positions of
// two equally long state sequences. Throws std::invalid_argument on a
// length mismatch or empty input.
double ade(std::span<const VehicleState> realized, std::span<const VehicleState> expert);

struct MinAde {
  double value = 0.0;
  int index = 0;  // rollout achieving the minimum (ties -> lowest index)
};

MinAde min_ade(const std::vector<std::vector<VehicleState>>& rollouts,
               std::span<const VehicleState> expert);

// True iff any step collides with a replayed disc agent.
bool overlap_flag(std::span<const VehicleState> realized, std::span<const OtherAgent> others,
                  double ego_radius = 1.0);

// True iff any step leaves the road corridor.
bool offroad_flag(std::span<const VehicleState> realized, const Roadgraph& rg);

struct TrajectoryEval {
  double ade = 0.0;
  bool overlap = false;
  bool offroad = false;
};

TrajectoryEval evaluate_trajectory(std::span<const VehicleState> realized,
                                   const Scenario& scenario, double ego_radius = 1.0);

}  // namespace awm
