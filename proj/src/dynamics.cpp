#include "awm/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace awm {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void require_finite(const VehicleState& s, const char* who) {
  if (!all_finite(s)) throw std::domain_error(std::string(who) + ": non-finite state");
}

void require_finite(const Action& a, const char* who) {
  if (!all_finite(a)) throw std::domain_error(std::string(who) + ": non-finite action");
}

}  // namespace

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double signed_speed(const VehicleState& s) {
  return s.vx * std::cos(s.yaw) + s.vy * std::sin(s.yaw);
}

bool all_finite(const VehicleState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.vx) &&
         std::isfinite(s.vy) && std::isfinite(s.yaw);
}

bool all_finite(const Action& a) {
  return std::isfinite(a.accel) && std::isfinite(a.curvature);
}

bool is_consistent(const VehicleState& s, double tol) {
  const double v = signed_speed(s);
  return std::abs(s.vx - v * std::cos(s.yaw)) < tol &&
         std::abs(s.vy - v * std::sin(s.yaw)) < tol;
}

Action clip_action(const Action& a, const SimConfig& cfg) {
  if (!cfg.clip_actions) return a;
  Action c = a;
  if (c.accel > cfg.max_accel) c.accel = cfg.max_accel;
  if (c.accel < -cfg.max_accel) c.accel = -cfg.max_accel;
  if (c.curvature > cfg.max_curvature) c.curvature = cfg.max_curvature;
  if (c.curvature < -cfg.max_curvature) c.curvature = -cfg.max_curvature;
  return c;
}

VehicleState step(const VehicleState& s, const Action& a_raw, const SimConfig& cfg) {
  require_finite(s, "step");
  require_finite(a_raw, "step");
  const Action a = clip_action(a_raw, cfg);
  const double dt = cfg.dt;

  const double c = std::cos(s.yaw);
  const double sn = std::sin(s.yaw);
  const double v = s.vx * c + s.vy * sn;
  const double v2 = v + a.accel * dt;
  const double arc = v * dt + 0.5 * a.accel * dt * dt;
  const double yaw2 = s.yaw + a.curvature * arc;
  const double c2 = std::cos(yaw2);
  const double sn2 = std::sin(yaw2);

  VehicleState out;
  out.x = s.x + arc * c;
  out.y = s.y + arc * sn;
  out.yaw = yaw2;
  out.vx = v2 * c2;
  out.vy = v2 * sn2;
  return out;
}

VehicleState inverse_step(const VehicleState& s_next, const Action& a_raw, const SimConfig& cfg) {
  require_finite(s_next, "inverse_step");
  require_finite(a_raw, "inverse_step");
  const Action a = clip_action(a_raw, cfg);
  const double dt = cfg.dt;

  const double c2 = std::cos(s_next.yaw);
  const double sn2 = std::sin(s_next.yaw);
  const double v2 = s_next.vx * c2 + s_next.vy * sn2;
  const double v = v2 - a.accel * dt;
  const double arc = v * dt + 0.5 * a.accel * dt * dt;
  const double yaw = s_next.yaw - a.curvature * arc;
  const double c = std::cos(yaw);
  const double sn = std::sin(yaw);

  VehicleState out;
  out.x = s_next.x - arc * c;
  out.y = s_next.y - arc * sn;
  out.yaw = yaw;
  out.vx = v * c;
  out.vy = v * sn;
  return out;
}

Action inv_kin(const VehicleState& s, const VehicleState& target, const SimConfig& cfg) {
  require_finite(s, "inv_kin");
  require_finite(target, "inv_kin");
  const double dt = cfg.dt;

  const double v = signed_speed(s);
  const double v_tgt = target.vx * std::cos(target.yaw) + target.vy * std::sin(target.yaw);
  const double accel = (v_tgt - v) / dt;
  const double arc = v * dt + 0.5 * accel * dt * dt;

  Action a;
  a.accel = accel;
  a.curvature = std::abs(arc) > cfg.arc_epsilon ? wrap_angle(target.yaw - s.yaw) / arc : 0.0;
  return clip_action(a, cfg);
}

StepVjp step_vjp(const VehicleState& s, const Action& a_raw, const SimConfig& cfg,
                 const StateVec& upstream) {
  require_finite(s, "step_vjp");
  require_finite(a_raw, "step_vjp");
  const Action a = clip_action(a_raw, cfg);
  const bool sat_accel = cfg.clip_actions && std::abs(a_raw.accel) > cfg.max_accel;
  const bool sat_curv = cfg.clip_actions && std::abs(a_raw.curvature) > cfg.max_curvature;
  const double dt = cfg.dt;

  // forward intermediates
  const double c = std::cos(s.yaw);
  const double sn = std::sin(s.yaw);
  const double v = s.vx * c + s.vy * sn;
  const double v2 = v + a.accel * dt;
  const double arc = v * dt + 0.5 * a.accel * dt * dt;
  const double yaw2 = s.yaw + a.curvature * arc;
  const double c2 = std::cos(yaw2);
  const double sn2 = std::sin(yaw2);

  const double ux = upstream[0], uy = upstream[1];
  const double uvx = upstream[2], uvy = upstream[3], uyaw = upstream[4];

  // reverse pass
  const double g_yaw2 = uyaw + v2 * (-sn2 * uvx + c2 * uvy);
  const double g_v2 = c2 * uvx + sn2 * uvy;
  const double g_arc = c * ux + sn * uy + a.curvature * g_yaw2;
  const double g_curv = arc * g_yaw2;
  const double g_v = dt * g_arc + g_v2;
  const double g_accel = 0.5 * dt * dt * g_arc + dt * g_v2;
  const double g_c = arc * ux + s.vx * g_v;
  const double g_sn = arc * uy + s.vy * g_v;

  StepVjp out;
  out.ds[0] = ux;
  out.ds[1] = uy;
  out.ds[2] = c * g_v;
  out.ds[3] = sn * g_v;
  out.ds[4] = g_yaw2 - sn * g_c + c * g_sn;
  out.da[0] = sat_accel ? 0.0 : g_accel;
  out.da[1] = sat_curv ? 0.0 : g_curv;
  return out;
}

StepVjp inverse_step_vjp(const VehicleState& s_next, const Action& a_raw, const SimConfig& cfg,
                         const StateVec& upstream) {
  require_finite(s_next, "inverse_step_vjp");
  require_finite(a_raw, "inverse_step_vjp");
  const Action a = clip_action(a_raw, cfg);
  const bool sat_accel = cfg.clip_actions && std::abs(a_raw.accel) > cfg.max_accel;
  const bool sat_curv = cfg.clip_actions && std::abs(a_raw.curvature) > cfg.max_curvature;
  const double dt = cfg.dt;

  const double c2 = std::cos(s_next.yaw);
  const double sn2 = std::sin(s_next.yaw);
  const double v2 = s_next.vx * c2 + s_next.vy * sn2;
  const double v = v2 - a.accel * dt;
  const double arc = v * dt + 0.5 * a.accel * dt * dt;
  const double yaw = s_next.yaw - a.curvature * arc;
  const double c = std::cos(yaw);
  const double sn = std::sin(yaw);

  const double ux = upstream[0], uy = upstream[1];
  const double uvx = upstream[2], uvy = upstream[3], uyaw = upstream[4];

  // g_c = v*uvx - arc*ux, g_sn = v*uvy - arc*uy
  const double g_yaw = uyaw - sn * (v * uvx - arc * ux) + c * (v * uvy - arc * uy);
  double g_arc = -c * ux - sn * uy - a.curvature * g_yaw;
  const double g_curv = -arc * g_yaw;
  const double g_v = c * uvx + sn * uvy + dt * g_arc;
  const double g_accel = 0.5 * dt * dt * g_arc - dt * g_v;
  const double g_v2 = g_v;

  StepVjp out;
  out.ds[0] = ux;
  out.ds[1] = uy;
  out.ds[2] = c2 * g_v2;
  out.ds[3] = sn2 * g_v2;
  out.ds[4] = g_yaw + (-sn2 * s_next.vx + c2 * s_next.vy) * g_v2;
  out.da[0] = sat_accel ? 0.0 : g_accel;
  out.da[1] = sat_curv ? 0.0 : g_curv;
  return out;
}

InvKinVjp inv_kin_vjp(const VehicleState& s, const VehicleState& target, const SimConfig& cfg,
                      const ActionVec& upstream) {
  require_finite(s, "inv_kin_vjp");
  require_finite(target, "inv_kin_vjp");
  const double dt = cfg.dt;

  const double c = std::cos(s.yaw);
  const double sn = std::sin(s.yaw);
  const double ct = std::cos(target.yaw);
  const double snt = std::sin(target.yaw);
  const double v = s.vx * c + s.vy * sn;
  const double v_tgt = target.vx * ct + target.vy * snt;
  const double accel = (v_tgt - v) / dt;
  const double arc = v * dt + 0.5 * accel * dt * dt;
  const bool curv_live = std::abs(arc) > cfg.arc_epsilon;

  bool sat_accel = false;
  bool sat_curv = false;
  if (cfg.clip_actions) {
    const double curv = curv_live ? wrap_angle(target.yaw - s.yaw) / arc : 0.0;
    sat_accel = std::abs(accel) > cfg.max_accel;
    sat_curv = std::abs(curv) > cfg.max_curvature;
  }

  const double ua = sat_accel ? 0.0 : upstream[0];
  const double uk = sat_curv ? 0.0 : upstream[1];

  double g_v = -ua / dt;
  double g_vt = ua / dt;
  double g_yaw = 0.0;
  double g_yawt = 0.0;
  if (curv_live && uk != 0.0) {
    const double w = wrap_angle(target.yaw - s.yaw);
    const double g_w = uk / arc;
    const double g_arc = -w / (arc * arc) * uk;
    g_yawt += g_w;
    g_yaw -= g_w;
    // d(arc)/dv = dt/2, d(arc)/dv_tgt = dt/2 (through accel)
    g_v += 0.5 * dt * g_arc;
    g_vt += 0.5 * dt * g_arc;
  }

  InvKinVjp out;
  out.ds[2] = c * g_v;
  out.ds[3] = sn * g_v;
  out.ds[4] = g_yaw + (-s.vx * sn + s.vy * c) * g_v;
  out.dtarget[2] = ct * g_vt;
  out.dtarget[3] = snt * g_vt;
  out.dtarget[4] = g_yawt + (-target.vx * snt + target.vy * ct) * g_vt;
  return out;
}

}  // namespace awm
