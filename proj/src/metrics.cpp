#include "awm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace awm {

double ade(std::span<const VehicleState> realized, std::span<const VehicleState> expert) {
  if (realized.size() != expert.size())
    throw std::invalid_argument("ade: sequence length mismatch");
  if (realized.empty()) throw std::invalid_argument("ade: empty sequences");
  double acc = 0.0;
  for (std::size_t t = 0; t < realized.size(); ++t) {
    acc += std::hypot(realized[t].x - expert[t].x, realized[t].y - expert[t].y);
  }
  return acc / static_cast<double>(realized.size());
}

MinAde min_ade(const std::vector<std::vector<VehicleState>>& rollouts,
               std::span<const VehicleState> expert) {
  if (rollouts.empty()) throw std::invalid_argument("min_ade: no rollouts");
  MinAde best;
  best.value = ade(rollouts[0], expert);
  best.index = 0;
  for (int i = 1; i < static_cast<int>(rollouts.size()); ++i) {
    const double v = ade(rollouts[static_cast<std::size_t>(i)], expert);
    if (v < best.value) {
      best.value = v;
      best.index = i;
    }
  }
  return best;
}

bool overlap_flag(std::span<const VehicleState> realized, std::span<const OtherAgent> others,
                  double ego_radius) {
  for (std::size_t t = 0; t < realized.size(); ++t) {
    for (const OtherAgent& agent : others) {
      if (agent.poses.empty()) continue;
      const std::size_t tt = std::min(t, agent.poses.size() - 1);
      const OtherPose& p = agent.poses[tt];
      const double d = std::hypot(realized[t].x - p.x, realized[t].y - p.y);
      if (d < ego_radius + agent.radius) return true;
    }
  }
  return false;
}

bool offroad_flag(std::span<const VehicleState> realized, const Roadgraph& rg) {
  for (const VehicleState& s : realized) {
    if (distance_to_roadgraph({s.x, s.y}, rg) > rg.half_width) return true;
  }
  return false;
}

TrajectoryEval evaluate_trajectory(std::span<const VehicleState> realized,
                                   const Scenario& scenario, double ego_radius) {
  TrajectoryEval e;
  e.ade = ade(realized, scenario.expert.states);
  e.overlap = overlap_flag(realized, scenario.others, ego_radius);
  e.offroad = offroad_flag(realized, scenario.roadgraph);
  return e;
}

}  // namespace awm
