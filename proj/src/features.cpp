#include "awm/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace awm {

const char* route_conditioning_name(RouteConditioning m) {
  switch (m) {
    case RouteConditioning::kNone: return "none";
    case RouteConditioning::kHeading: return "heading";
    case RouteConditioning::kWaypoint: return "waypoint";
  }
  return "none";
}

bool route_conditioning_from_name(const std::string& name, RouteConditioning* out) {
  if (name == "none") { *out = RouteConditioning::kNone; return true; }
  if (name == "heading") { *out = RouteConditioning::kHeading; return true; }
  if (name == "waypoint") { *out = RouteConditioning::kWaypoint; return true; }
  return false;
}

EncodeContext build_encode_context(const Scenario& scenario, int t, const VehicleState& ego,
                                   RouteConditioning mode, double dt) {
  EncodeContext ctx;
  ctx.goal_x = scenario.goal.x;
  ctx.goal_y = scenario.goal.y;
  ctx.goal_heading = scenario.goal.heading;
  ctx.route_mode = static_cast<int>(mode);

  // nearest roadgraph points, global index order breaks ties
  struct Cand { double d2; int idx; double x, y; };
  std::vector<Cand> cands;
  int idx = 0;
  for (const Polyline& seg : scenario.roadgraph.segments) {
    for (const Vec2& p : seg.pts) {
      const double dx = p.x - ego.x;
      const double dy = p.y - ego.y;
      cands.push_back({dx * dx + dy * dy, idx++, p.x, p.y});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.d2 != b.d2 ? a.d2 < b.d2 : a.idx < b.idx;
  });
  for (int k = 0; k < kRoadPoints && k < static_cast<int>(cands.size()); ++k) {
    ctx.road[static_cast<std::size_t>(k)] = {cands[static_cast<std::size_t>(k)].x,
                                             cands[static_cast<std::size_t>(k)].y, true};
  }

  struct AgentCand { double d2; int idx; };
  std::vector<AgentCand> acands;
  for (int j = 0; j < static_cast<int>(scenario.others.size()); ++j) {
    const OtherAgent& agent = scenario.others[static_cast<std::size_t>(j)];
    if (agent.poses.empty()) continue;
    const int tt = std::min<int>(t, static_cast<int>(agent.poses.size()) - 1);
    const OtherPose& p = agent.poses[static_cast<std::size_t>(tt)];
    const double dx = p.x - ego.x;
    const double dy = p.y - ego.y;
    acands.push_back({dx * dx + dy * dy, j});
  }
  std::stable_sort(acands.begin(), acands.end(), [](const AgentCand& a, const AgentCand& b) {
    return a.d2 != b.d2 ? a.d2 < b.d2 : a.idx < b.idx;
  });
  for (int m = 0; m < kAgentSlots && m < static_cast<int>(acands.size()); ++m) {
    const OtherAgent& agent =
        scenario.others[static_cast<std::size_t>(acands[static_cast<std::size_t>(m)].idx)];
    const int tt = std::min<int>(t, static_cast<int>(agent.poses.size()) - 1);
    const OtherPose& p = agent.poses[static_cast<std::size_t>(tt)];
    double vx = 0.0, vy = 0.0;
    other_velocity(agent, tt, dt, &vx, &vy);
    ctx.agents[static_cast<std::size_t>(m)] = {p.x, p.y, vx, vy, true};
  }
  return ctx;
}

FeatureVector compute_features(const EncodeContext& ctx, const VehicleState& ego) {
  FeatureVector f;
  const double c = std::cos(ego.yaw);
  const double sn = std::sin(ego.yaw);

  f.values[0] = ego.vx * c + ego.vy * sn;

  switch (static_cast<RouteConditioning>(ctx.route_mode)) {
    case RouteConditioning::kNone:
      f.values[1] = 0.0;
      break;
    case RouteConditioning::kHeading:
      f.values[1] = wrap_angle(ctx.goal_heading - ego.yaw);
      break;
    case RouteConditioning::kWaypoint: {
      const double dx = ctx.goal_x - ego.x;
      const double dy = ctx.goal_y - ego.y;
      f.values[1] = dx * dx + dy * dy > 1e-12
                        ? wrap_angle(std::atan2(dy, dx) - ego.yaw)
                        : 0.0;
      break;
    }
  }

  for (int k = 0; k < kRoadPoints; ++k) {
    const auto& rp = ctx.road[static_cast<std::size_t>(k)];
    if (!rp.valid) continue;
    f.road_mask[static_cast<std::size_t>(k)] = 1;
    const double dx = rp.x - ego.x;
    const double dy = rp.y - ego.y;
    f.values[static_cast<std::size_t>(2 + 2 * k)] = dx * c + dy * sn;
    f.values[static_cast<std::size_t>(3 + 2 * k)] = -dx * sn + dy * c;
  }

  const int agent_base = 2 + 2 * kRoadPoints;
  for (int m = 0; m < kAgentSlots; ++m) {
    const auto& ag = ctx.agents[static_cast<std::size_t>(m)];
    if (!ag.valid) continue;
    f.agent_mask[static_cast<std::size_t>(m)] = 1;
    const double dx = ag.x - ego.x;
    const double dy = ag.y - ego.y;
    const double dvx = ag.vx - ego.vx;
    const double dvy = ag.vy - ego.vy;
    const std::size_t base = static_cast<std::size_t>(agent_base + 4 * m);
    f.values[base + 0] = dx * c + dy * sn;
    f.values[base + 1] = -dx * sn + dy * c;
    f.values[base + 2] = dvx * c + dvy * sn;
    f.values[base + 3] = -dvx * sn + dvy * c;
  }
  return f;
}

StateVec features_vjp(const EncodeContext& ctx, const VehicleState& ego,
                      std::span<const double> upstream) {
  StateVec g{};
  const double c = std::cos(ego.yaw);
  const double sn = std::sin(ego.yaw);

  // speed feature: v = vx*c + vy*sn
  {
    const double u = upstream[0];
    g[2] += c * u;
    g[3] += sn * u;
    g[4] += (-ego.vx * sn + ego.vy * c) * u;
  }

  switch (static_cast<RouteConditioning>(ctx.route_mode)) {
    case RouteConditioning::kNone:
      break;
    case RouteConditioning::kHeading:
      g[4] += -upstream[1];
      break;
    case RouteConditioning::kWaypoint: {
      const double dx = ctx.goal_x - ego.x;
      const double dy = ctx.goal_y - ego.y;
      const double r2 = dx * dx + dy * dy;
      if (r2 > 1e-12) {
        const double u = upstream[1];
        // d atan2(dy,dx) / d ego = (dy, -dx) / r^2
        g[0] += dy / r2 * u;
        g[1] += -dx / r2 * u;
        g[4] += -u;
      }
      break;
    }
  }

  for (int k = 0; k < kRoadPoints; ++k) {
    const auto& rp = ctx.road[static_cast<std::size_t>(k)];
    if (!rp.valid) continue;
    const double ux = upstream[static_cast<std::size_t>(2 + 2 * k)];
    const double uy = upstream[static_cast<std::size_t>(3 + 2 * k)];
    if (ux == 0.0 && uy == 0.0) continue;
    const double dx = rp.x - ego.x;
    const double dy = rp.y - ego.y;
    const double ex = dx * c + dy * sn;
    const double ey = -dx * sn + dy * c;
    g[0] += -c * ux + sn * uy;
    g[1] += -sn * ux - c * uy;
    g[4] += ey * ux - ex * uy;
  }

  const int agent_base = 2 + 2 * kRoadPoints;
  for (int m = 0; m < kAgentSlots; ++m) {
    const auto& ag = ctx.agents[static_cast<std::size_t>(m)];
    if (!ag.valid) continue;
    const std::size_t base = static_cast<std::size_t>(agent_base + 4 * m);
    const double upx = upstream[base + 0];
    const double upy = upstream[base + 1];
    const double uvx = upstream[base + 2];
    const double uvy = upstream[base + 3];
    const double dx = ag.x - ego.x;
    const double dy = ag.y - ego.y;
    const double dvx = ag.vx - ego.vx;
    const double dvy = ag.vy - ego.vy;
    const double ex = dx * c + dy * sn;
    const double ey = -dx * sn + dy * c;
    const double evx = dvx * c + dvy * sn;
    const double evy = -dvx * sn + dvy * c;
    g[0] += -c * upx + sn * upy;
    g[1] += -sn * upx - c * upy;
    g[2] += -c * uvx + sn * uvy;
    g[3] += -sn * uvx - c * uvy;
    g[4] += ey * upx - ex * upy + evy * uvx - evx * uvy;
  }
  return g;
}

}  // namespace awm
