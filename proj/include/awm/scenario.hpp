#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "awm/dynamics.hpp"

namespace awm {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Polyline {
  std::vector<Vec2> pts;
};

// Centerline corridors with a shared half-width. Multiple segments so a
// junction (fork) is representable; simple roads use a single segment.
struct Roadgraph {
  std::vector<Polyline> segments;
  double half_width = 3.0;
};

struct OtherPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

// Replayed traffic participant: a disc following a scripted path,
// independent of what the ego does.
struct OtherAgent {
  double radius = 1.0;
  std::vector<OtherPose> poses;  // one per timestep
};

struct Goal {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// Reference trajectory rolled through step() itself, so
// states[t+1] == step(states[t], actions[t]) holds exactly.
struct ExpertTrajectory {
  std::vector<VehicleState> states;  // length T
  std::vector<Action> actions;       // length T-1
};

enum class ScenarioKind { kStraight, kArc, kSCurve, kFork, kStopGo };

const char* kind_name(ScenarioKind k);
bool kind_from_name(const std::string& name, ScenarioKind* out);
// Comma-separated kind names; throws std::invalid_argument on unknown names.
std::vector<ScenarioKind> parse_kind_list(const std::string& text);

struct Scenario {
  std::uint64_t seed = 0;
  ScenarioKind kind = ScenarioKind::kStraight;
  Roadgraph roadgraph;
  ExpertTrajectory expert;
  std::vector<OtherAgent> others;
  Goal goal;
};

std::string scenario_label(const Scenario& s);

struct GeneratorParams {
  SimConfig sim;      // clip_actions stays on for expert generation
  int horizon = 80;   // states per episode (8 s at 10 Hz)
  double half_width = 3.0;
  double ego_radius = 1.0;
};

// Deterministic per (kind, seed). The expert is driven by a scripted
// pure-pursuit controller whose clipped actions are rolled through step().
Scenario generate_scenario(ScenarioKind kind, std::uint64_t seed,
                           const GeneratorParams& params = {});

// --- geometry helpers ---

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);
double distance_to_polyline(const Vec2& p, const Polyline& line);
double distance_to_roadgraph(const Vec2& p, const Roadgraph& rg);
double polyline_length(const Polyline& line);
// Point at arclength s; extrapolates linearly beyond both ends.
Vec2 polyline_point(const Polyline& line, double s);
Vec2 polyline_tangent(const Polyline& line, double s);

// Velocity of a replayed agent at step t (forward difference of poses).
void other_velocity(const OtherAgent& agent, int t, double dt, double* vx, double* vy);

// --- dataset persistence ---
// JSON-lines; one scenario per line after a header line. Doubles are
// serialized as 16-hex-digit bit patterns so round trips are lossless.

struct DatasetError : std::runtime_error {
  explicit DatasetError(const std::string& msg, int scenario_index = -1)
      : std::runtime_error(msg), index(scenario_index) {}
  int index;
};

void save_dataset(const std::vector<Scenario>& scenarios, const std::string& path);
std::vector<Scenario> load_dataset(const std::string& path);

}  // namespace awm
