#include "awm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <limits>

#include "awm/rng.hpp"
#include "json.hpp"

namespace awm {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace

const char* kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kStraight: return "straight";
    case ScenarioKind::kArc: return "arc";
    case ScenarioKind::kSCurve: return "s-curve";
    case ScenarioKind::kFork: return "fork";
    case ScenarioKind::kStopGo: return "stop-go";
  }
  return "straight";
}

bool kind_from_name(const std::string& name, ScenarioKind* out) {
  if (name == "straight") { *out = ScenarioKind::kStraight; return true; }
  if (name == "arc") { *out = ScenarioKind::kArc; return true; }
  if (name == "s-curve" || name == "s_curve") { *out = ScenarioKind::kSCurve; return true; }
  if (name == "fork") { *out = ScenarioKind::kFork; return true; }
  if (name == "stop-go" || name == "stop_go") { *out = ScenarioKind::kStopGo; return true; }
  return false;
}

std::vector<ScenarioKind> parse_kind_list(const std::string& text) {
  std::vector<ScenarioKind> out;
  std::string cell;
  std::stringstream ss(text);
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    ScenarioKind kind;
    if (!kind_from_name(cell, &kind)) throw std::invalid_argument("unknown scenario kind: " + cell);
    out.push_back(kind);
  }
  if (out.empty()) throw std::invalid_argument("no scenario kinds given");
  return out;
}

std::string scenario_label(const Scenario& s) {
  return std::string(kind_name(s.kind)) + "-" + std::to_string(s.seed);
}

// --- geometry ---

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double abx = b.x - a.x;
  const double aby = b.y - a.y;
  const double apx = p.x - a.x;
  const double apy = p.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = len2 > 0.0 ? (apx * abx + apy * aby) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = apx - t * abx;
  const double dy = apy - t * aby;
  return std::sqrt(dx * dx + dy * dy);
}

double distance_to_polyline(const Vec2& p, const Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.pts.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line.pts[i], line.pts[i + 1]));
  }
  if (line.pts.size() == 1) {
    const double dx = p.x - line.pts[0].x;
    const double dy = p.y - line.pts[0].y;
    best = std::sqrt(dx * dx + dy * dy);
  }
  return best;
}

double distance_to_roadgraph(const Vec2& p, const Roadgraph& rg) {
  double best = std::numeric_limits<double>::infinity();
  for (const Polyline& seg : rg.segments) best = std::min(best, distance_to_polyline(p, seg));
  return best;
}

double polyline_length(const Polyline& line) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < line.pts.size(); ++i) {
    acc += std::hypot(line.pts[i + 1].x - line.pts[i].x, line.pts[i + 1].y - line.pts[i].y);
  }
  return acc;
}

Vec2 polyline_point(const Polyline& line, double s) {
  const auto& pts = line.pts;
  if (pts.size() < 2) return pts.empty() ? Vec2{} : pts[0];
  if (s <= 0.0) {
    const Vec2 t = polyline_tangent(line, 0.0);
    return {pts[0].x + s * t.x, pts[0].y + s * t.y};
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg = std::hypot(pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y);
    if (acc + seg >= s) {
      const double f = seg > 0.0 ? (s - acc) / seg : 0.0;
      return {pts[i].x + f * (pts[i + 1].x - pts[i].x), pts[i].y + f * (pts[i + 1].y - pts[i].y)};
    }
    acc += seg;
  }
  const Vec2 t = polyline_tangent(line, polyline_length(line));
  const double over = s - acc;
  return {pts.back().x + over * t.x, pts.back().y + over * t.y};
}

Vec2 polyline_tangent(const Polyline& line, double s) {
  const auto& pts = line.pts;
  if (pts.size() < 2) return {1.0, 0.0};
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg = std::hypot(pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y);
    if (acc + seg >= s || i + 2 == pts.size()) {
      const double inv = seg > 0.0 ? 1.0 / seg : 0.0;
      return {(pts[i + 1].x - pts[i].x) * inv, (pts[i + 1].y - pts[i].y) * inv};
    }
    acc += seg;
  }
  return {1.0, 0.0};
}

void other_velocity(const OtherAgent& agent, int t, double dt, double* vx, double* vy) {
  *vx = 0.0;
  *vy = 0.0;
  const int n = static_cast<int>(agent.poses.size());
  if (n < 2 || dt <= 0.0) return;
  const int a = std::min(t, n - 2);
  const auto& p0 = agent.poses[static_cast<std::size_t>(a)];
  const auto& p1 = agent.poses[static_cast<std::size_t>(a + 1)];
  *vx = (p1.x - p0.x) / dt;
  *vy = (p1.y - p0.y) / dt;
}

// --- generation ---

namespace {

// Integrates a constant-curvature-per-section centerline at ~1 m spacing.
Polyline integrate_centerline(Vec2 start, double heading,
                              const std::vector<std::pair<double, double>>& sections) {
  Polyline line;
  line.pts.push_back(start);
  double th = heading;
  Vec2 p = start;
  for (const auto& [curvature, length] : sections) {
    const int steps = std::max(1, static_cast<int>(std::lround(length)));
    for (int i = 0; i < steps; ++i) {
      p.x += std::cos(th);
      p.y += std::sin(th);
      th += curvature;
      line.pts.push_back(p);
    }
  }
  return line;
}

struct RouteFollower {
  const Polyline* route;
  double kp_speed = 2.0;

  Action operator()(const VehicleState& s, double target_speed, const SimConfig& cfg) const {
    const double v = signed_speed(s);
    Action a;
    a.accel = kp_speed * (target_speed - v);

    // pure pursuit toward a lookahead point on the route
    const double lookahead = std::clamp(0.8 * std::abs(v), 4.0, 10.0);
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    double acc = 0.0;
    const auto& pts = route->pts;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double abx = pts[i + 1].x - pts[i].x;
      const double aby = pts[i + 1].y - pts[i].y;
      const double len2 = abx * abx + aby * aby;
      const double seg = std::sqrt(len2);
      double t = len2 > 0.0 ? ((s.x - pts[i].x) * abx + (s.y - pts[i].y) * aby) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = s.x - (pts[i].x + t * abx);
      const double dy = s.y - (pts[i].y + t * aby);
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best_s = acc + t * seg;
      }
      acc += seg;
    }
    const Vec2 target = polyline_point(*route, best_s + lookahead);
    const double c = std::cos(s.yaw);
    const double sn = std::sin(s.yaw);
    const double dx = target.x - s.x;
    const double dy = target.y - s.y;
    const double ey = -dx * sn + dy * c;  // lateral offset of the lookahead point
    const double dist2 = dx * dx + dy * dy;
    a.curvature = dist2 > 1e-9 ? 2.0 * ey / dist2 : 0.0;
    return clip_action(a, cfg);
  }
};

OtherAgent lane_follow_agent(const Polyline& route, double start_arclen, double speed,
                             double lateral_offset, int horizon, double dt, double radius) {
  OtherAgent agent;
  agent.radius = radius;
  agent.poses.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    const double s = start_arclen + speed * dt * static_cast<double>(t);
    const Vec2 p = polyline_point(route, s);
    const Vec2 tan = polyline_tangent(route, s);
    const double nx = -tan.y;
    const double ny = tan.x;
    OtherPose pose;
    pose.x = p.x + lateral_offset * nx;
    pose.y = p.y + lateral_offset * ny;
    pose.yaw = std::atan2(speed >= 0.0 ? tan.y : -tan.y, speed >= 0.0 ? tan.x : -tan.x);
    agent.poses.push_back(pose);
  }
  return agent;
}

}  // namespace

Scenario generate_scenario(ScenarioKind kind, std::uint64_t seed, const GeneratorParams& params) {
  Scenario sc;
  sc.seed = seed;
  sc.kind = kind;
  sc.roadgraph.half_width = params.half_width;

  // fork pairs (2k, 2k+1) share geometry; the parity bit only picks the branch
  const std::uint64_t geometry_seed = kind == ScenarioKind::kFork ? seed >> 1 : seed;
  Rng rng(derive_seed({0x5ce7a410u, static_cast<std::uint64_t>(kind), geometry_seed}));
  const double heading = rng.uniform(-kPi, kPi);
  const int T = params.horizon;
  const double dt = params.sim.dt;

  Polyline route;                    // what the expert follows
  double v0 = 0.0;                   // initial speed
  std::function<double(int)> target_speed;

  switch (kind) {
    case ScenarioKind::kStraight: {
      v0 = rng.uniform(8.5, 12.0);
      route = integrate_centerline({0.0, 0.0}, heading, {{0.0, 170.0}});
      sc.roadgraph.segments = {route};
      const double v = v0;
      target_speed = [v](int) { return v; };
      break;
    }
    case ScenarioKind::kArc: {
      v0 = rng.uniform(5.0, 9.0);
      const double radius = rng.uniform(30.0, 80.0);
      const double dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
      route = integrate_centerline({0.0, 0.0}, heading, {{dir / radius, 130.0}});
      sc.roadgraph.segments = {route};
      const double v = v0;
      target_speed = [v](int) { return v; };
      break;
    }
    case ScenarioKind::kSCurve: {
      v0 = rng.uniform(5.0, 9.0);
      const double r1 = rng.uniform(35.0, 70.0);
      const double r2 = rng.uniform(35.0, 70.0);
      const double dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
      route = integrate_centerline({0.0, 0.0}, heading,
                                   {{dir / r1, 65.0}, {-dir / r2, 65.0}});
      sc.roadgraph.segments = {route};
      const double v = v0;
      target_speed = [v](int) { return v; };
      break;
    }
    case ScenarioKind::kStopGo: {
      v0 = 6.0;
      route = integrate_centerline({0.0, 0.0}, heading, {{0.0, 170.0}});
      sc.roadgraph.segments = {route};
      // fixed dip-and-recover profile; the phase is shared across seeds so
      // the behavior is inferable from elapsed time alone
      target_speed = [](int t) {
        if (t < 18) return 6.0;
        if (t < 38) return 6.0 - 4.8 * (t - 18) / 20.0;
        if (t < 46) return 1.2;
        if (t < 66) return 1.2 + 4.8 * (t - 46) / 20.0;
        return 6.0;
      };
      break;
    }
    case ScenarioKind::kFork: {
      v0 = 7.0;
      // branches leave the junction with an immediate heading kink so the
      // two futures separate decisively, then bend gently apart
      const double kink = rng.uniform(0.25, 0.4);
      const double branch_radius = rng.uniform(35.0, 60.0);
      Polyline trunk = integrate_centerline({0.0, 0.0}, heading, {{0.0, 30.0}});
      const Vec2 junction = trunk.pts.back();
      Polyline left =
          integrate_centerline(junction, heading + kink, {{1.0 / branch_radius, 65.0}});
      Polyline right =
          integrate_centerline(junction, heading - kink, {{-1.0 / branch_radius, 65.0}});
      sc.roadgraph.segments = {trunk, left, right};
      const Polyline& branch = (seed & 1ull) ? left : right;
      route.pts = trunk.pts;
      route.pts.insert(route.pts.end(), branch.pts.begin() + 1, branch.pts.end());
      const double v = v0;
      target_speed = [v](int) { return v; };
      break;
    }
  }

  // expert: scripted controller rolled through the simulator
  VehicleState s;
  s.x = route.pts[0].x;
  s.y = route.pts[0].y;
  s.yaw = heading;
  s.vx = v0 * std::cos(heading);
  s.vy = v0 * std::sin(heading);

  RouteFollower follow{&route};
  sc.expert.states.reserve(static_cast<std::size_t>(T));
  sc.expert.actions.reserve(static_cast<std::size_t>(T - 1));
  sc.expert.states.push_back(s);
  for (int t = 0; t + 1 < T; ++t) {
    const Action a = follow(s, target_speed(t), params.sim);
    s = step(s, a, params.sim);
    sc.expert.actions.push_back(a);
    sc.expert.states.push_back(s);
  }

  sc.goal.x = sc.expert.states.back().x;
  sc.goal.y = sc.expert.states.back().y;
  sc.goal.heading = sc.expert.states.back().yaw;

  if (kind != ScenarioKind::kFork) {
    double vmax = 0.0;
    for (int t = 0; t < T; ++t) vmax = std::max(vmax, target_speed(t));
    sc.others.push_back(lane_follow_agent(route, 25.0, vmax * 1.25, 0.0, T, dt, 1.0));
    sc.others.push_back(lane_follow_agent(route, 120.0, -8.0, 7.0, T, dt, 1.0));
  }
  return sc;
}

// --- dataset persistence ---

namespace {

std::string hex_from_double(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

double double_from_hex(const std::string& s) {
  if (s.size() != 16) throw std::invalid_argument("bad float literal: " + s);
  const std::uint64_t bits = std::stoull(s, nullptr, 16);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string hex_from_u64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

using json = nlohmann::json;

json state_to_json(const VehicleState& s) {
  return json::array({hex_from_double(s.x), hex_from_double(s.y), hex_from_double(s.vx),
                      hex_from_double(s.vy), hex_from_double(s.yaw)});
}

VehicleState state_from_json(const json& j) {
  VehicleState s;
  s.x = double_from_hex(j.at(0).get<std::string>());
  s.y = double_from_hex(j.at(1).get<std::string>());
  s.vx = double_from_hex(j.at(2).get<std::string>());
  s.vy = double_from_hex(j.at(3).get<std::string>());
  s.yaw = double_from_hex(j.at(4).get<std::string>());
  return s;
}

}  // namespace

void save_dataset(const std::vector<Scenario>& scenarios, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot open for writing: " + path);

  json header;
  header["schema"] = "awm-scenarios";
  header["version"] = 1;
  header["count"] = scenarios.size();
  out << header.dump() << "\n";

  for (const Scenario& sc : scenarios) {
    json j;
    j["seed"] = hex_from_u64(sc.seed);
    j["kind"] = kind_name(sc.kind);
    j["half_width"] = hex_from_double(sc.roadgraph.half_width);
    json segs = json::array();
    for (const Polyline& seg : sc.roadgraph.segments) {
      json pts = json::array();
      for (const Vec2& p : seg.pts) {
        pts.push_back(hex_from_double(p.x));
        pts.push_back(hex_from_double(p.y));
      }
      segs.push_back(std::move(pts));
    }
    j["segments"] = std::move(segs);
    json states = json::array();
    for (const VehicleState& s : sc.expert.states) states.push_back(state_to_json(s));
    j["expert_states"] = std::move(states);
    json actions = json::array();
    for (const Action& a : sc.expert.actions) {
      actions.push_back(
          json::array({hex_from_double(a.accel), hex_from_double(a.curvature)}));
    }
    j["expert_actions"] = std::move(actions);
    json others = json::array();
    for (const OtherAgent& agent : sc.others) {
      json o;
      o["radius"] = hex_from_double(agent.radius);
      json poses = json::array();
      for (const OtherPose& p : agent.poses) {
        poses.push_back(json::array(
            {hex_from_double(p.x), hex_from_double(p.y), hex_from_double(p.yaw)}));
      }
      o["poses"] = std::move(poses);
      others.push_back(std::move(o));
    }
    j["others"] = std::move(others);
    j["goal"] = json::array({hex_from_double(sc.goal.x), hex_from_double(sc.goal.y),
                             hex_from_double(sc.goal.heading)});
    out << j.dump() << "\n";
  }
  if (!out) throw DatasetError("write failed: " + path);
}

std::vector<Scenario> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DatasetError("empty file (missing header): " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const std::exception& e) {
    throw DatasetError(std::string("malformed header: ") + e.what());
  }
  if (header.value("schema", "") != "awm-scenarios")
    throw DatasetError("not an awm scenario dataset: " + path);
  if (header.value("version", -1) != 1)
    throw DatasetError("unsupported dataset version " +
                       std::to_string(header.value("version", -1)));

  std::vector<Scenario> out;
  int index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Scenario sc;
      sc.seed = std::stoull(j.at("seed").get<std::string>(), nullptr, 16);
      if (!kind_from_name(j.at("kind").get<std::string>(), &sc.kind))
        throw std::invalid_argument("unknown kind");
      sc.roadgraph.half_width = double_from_hex(j.at("half_width").get<std::string>());
      for (const json& seg : j.at("segments")) {
        Polyline line_out;
        if (seg.size() % 2 != 0) throw std::invalid_argument("odd segment array");
        for (std::size_t i = 0; i < seg.size(); i += 2) {
          line_out.pts.push_back({double_from_hex(seg.at(i).get<std::string>()),
                                  double_from_hex(seg.at(i + 1).get<std::string>())});
        }
        sc.roadgraph.segments.push_back(std::move(line_out));
      }
      for (const json& s : j.at("expert_states")) sc.expert.states.push_back(state_from_json(s));
      for (const json& a : j.at("expert_actions")) {
        sc.expert.actions.push_back({double_from_hex(a.at(0).get<std::string>()),
                                     double_from_hex(a.at(1).get<std::string>())});
      }
      for (const json& o : j.at("others")) {
        OtherAgent agent;
        agent.radius = double_from_hex(o.at("radius").get<std::string>());
        for (const json& p : o.at("poses")) {
          agent.poses.push_back({double_from_hex(p.at(0).get<std::string>()),
                                 double_from_hex(p.at(1).get<std::string>()),
                                 double_from_hex(p.at(2).get<std::string>())});
        }
        sc.others.push_back(std::move(agent));
      }
      const json& g = j.at("goal");
      sc.goal = {double_from_hex(g.at(0).get<std::string>()),
                 double_from_hex(g.at(1).get<std::string>()),
                 double_from_hex(g.at(2).get<std::string>())};
      out.push_back(std::move(sc));
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception& e) {
      throw DatasetError("malformed scenario record " + std::to_string(index) + ": " + e.what(),
                         index);
    }
    ++index;
  }
  return out;
}

}  // namespace awm
