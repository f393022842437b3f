#pragma once

#include <array>
#include <cstddef>

namespace awm {

inline constexpr int kStateDim = 5;   // x, y, vx, vy, yaw
inline constexpr int kActionDim = 2;  // accel, curvature

// Planar vehicle state. Yaw is kept unwrapped during rollouts; angle
// wrapping happens only inside inv_kin and in metrics. States produced by
// step() satisfy vx = v*cos(yaw), vy = v*sin(yaw) with
// v = vx*cos(yaw) + vy*sin(yaw).
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double yaw = 0.0;
};

struct Action {
  double accel = 0.0;      // m/s^2
  double curvature = 0.0;  // 1/m
};

struct SimConfig {
  double dt = 0.1;            // s
  bool clip_actions = true;
  double arc_epsilon = 1e-6;  // below this arc length, curvature is unobservable
  double max_accel = 6.0;     // m/s^2
  double max_curvature = 0.3; // 1/m
};

using StateVec = std::array<double, kStateDim>;
using ActionVec = std::array<double, kActionDim>;

// Maps an angle to (-pi, pi].
double wrap_angle(double a);

// Signed speed: the velocity projected onto the heading direction. Keeps
// reverse motion representable and the map smooth (unlike hypot).
double signed_speed(const VehicleState& s);

bool all_finite(const VehicleState& s);
bool all_finite(const Action& a);
bool is_consistent(const VehicleState& s, double tol = 1e-9);

Action clip_action(const Action& a, const SimConfig& cfg);

// Forward dynamics. Constant-acceleration bicycle update:
//   v    = vx*cos(yaw) + vy*sin(yaw)
//   v'   = v + accel*dt
//   arc  = v*dt + accel*dt^2/2
//   yaw' = yaw + curvature*arc
//   x'   = x + arc*cos(yaw),  y' = y + arc*sin(yaw)
//   vx'  = v'*cos(yaw'),      vy' = v'*sin(yaw')
// Exactly invertible given the action; throws std::domain_error on
// non-finite input.
VehicleState step(const VehicleState& s, const Action& a, const SimConfig& cfg);

// Exact algebraic inverse: inverse_step(step(s, a), a) == s for consistent s.
VehicleState inverse_step(const VehicleState& s_next, const Action& a, const SimConfig& cfg);

// The action that transfers s into target under step(). Exact for feasible
// targets with |arc| > cfg.arc_epsilon; the curvature falls back to 0 on
// zero-length arcs (yaw is unobservable there).
Action inv_kin(const VehicleState& s, const VehicleState& target, const SimConfig& cfg);

struct StepVjp {
  StateVec ds{};   // upstream^T * d(next)/d(state)
  ActionVec da{};  // upstream^T * d(next)/d(action)
};

struct InvKinVjp {
  StateVec ds{};
  StateVec dtarget{};
};

// Hand-derived reverse-mode products for the three maps above. When
// clipping is active and an action channel is saturated, its gradient is
// zero (clip has zero slope outside the bounds).
StepVjp step_vjp(const VehicleState& s, const Action& a, const SimConfig& cfg,
                 const StateVec& upstream);
StepVjp inverse_step_vjp(const VehicleState& s_next, const Action& a, const SimConfig& cfg,
                         const StateVec& upstream);
InvKinVjp inv_kin_vjp(const VehicleState& s, const VehicleState& target, const SimConfig& cfg,
                      const ActionVec& upstream);

inline StateVec to_vec(const VehicleState& s) { return {s.x, s.y, s.vx, s.vy, s.yaw}; }
inline ActionVec to_vec(const Action& a) { return {a.accel, a.curvature}; }
inline VehicleState state_from(const double* p) { return {p[0], p[1], p[2], p[3], p[4]}; }
inline Action action_from(const double* p) { return {p[0], p[1]}; }

}  // namespace awm
