#include "awm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace awm {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_eval_report(const std::string& path, const std::vector<EvalRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& r : rows) {
    cells.push_back({r.scenario, format_double(r.ade), std::to_string(r.best_index),
                     r.overlap ? "1" : "0", r.offroad ? "1" : "0", std::to_string(r.rollouts)});
  }
  write_csv(path, {"scenario", "ade", "best_rollout", "overlap", "offroad", "rollouts"}, cells);
}

void write_mpc_report(const std::string& path, const std::vector<MpcEvalRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& r : rows) {
    cells.push_back({r.scenario, std::to_string(r.rollouts), std::to_string(r.top_k),
                     std::to_string(r.horizon), reward_kind_name(r.reward), format_double(r.ade),
                     r.overlap ? "1" : "0", r.offroad ? "1" : "0"});
  }
  write_csv(path, {"scenario", "rollouts", "top_k", "horizon", "reward", "ade", "overlap",
                   "offroad"},
            cells);
}

namespace {

struct Box {
  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  void grow(double x, double y) {
    min_x = std::min(min_x, x);
    min_y = std::min(min_y, y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
};

}  // namespace

std::string render_scenario_svg(const Scenario& scenario,
                                const std::vector<VehicleState>& realized,
                                const std::vector<ImaginedRollout>& imagined) {
  Box box;
  for (const auto& seg : scenario.roadgraph.segments)
    for (const auto& p : seg.pts) box.grow(p.x, p.y);
  for (const auto& s : scenario.expert.states) box.grow(s.x, s.y);
  for (const auto& s : realized) box.grow(s.x, s.y);
  for (const auto& roll : imagined)
    for (const auto& s : roll.states) box.grow(s.x, s.y);

  const double pad = 8.0;
  const double w = box.max_x - box.min_x + 2 * pad;
  const double h = box.max_y - box.min_y + 2 * pad;
  const double size = 900.0;
  const double scale = size / std::max(w, h);
  const auto px = [&](double x) { return (x - box.min_x + pad) * scale; };
  const auto py = [&](double y) { return size - (y - box.min_y + pad) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n";

  const auto polyline = [&](const std::vector<VehicleState>& pts, const char* style) {
    svg << "<polyline fill=\"none\" " << style << " points=\"";
    for (const auto& s : pts) svg << px(s.x) << "," << py(s.y) << " ";
    svg << "\"/>\n";
  };

  // corridor: thick grey band, centerline dashed
  for (const auto& seg : scenario.roadgraph.segments) {
    svg << "<polyline fill=\"none\" stroke=\"#d8d8d8\" stroke-linecap=\"round\" "
           "stroke-width=\""
        << 2.0 * scenario.roadgraph.half_width * scale << "\" points=\"";
    for (const auto& p : seg.pts) svg << px(p.x) << "," << py(p.y) << " ";
    svg << "\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"#b0b0b0\" stroke-dasharray=\"6,6\" "
           "stroke-width=\"1\" points=\"";
    for (const auto& p : seg.pts) svg << px(p.x) << "," << py(p.y) << " ";
    svg << "\"/>\n";
  }

  polyline(scenario.expert.states, "stroke=\"#2a9d2a\" stroke-width=\"2\"");
  if (!realized.empty()) polyline(realized, "stroke=\"#1f5fd0\" stroke-width=\"2\"");

  const char* palette[] = {"#e4572e", "#f3a712", "#9b5de5", "#00b4d8",
                           "#ef476f", "#06d6a0", "#8338ec"};
  for (std::size_t r = 0; r < imagined.size(); ++r) {
    const char* color = palette[r % (sizeof(palette) / sizeof(palette[0]))];
    for (std::size_t i = 1; i < imagined[r].states.size(); ++i) {
      const auto& s = imagined[r].states[i];
      svg << "<circle cx=\"" << px(s.x) << "\" cy=\"" << py(s.y)
          << "\" r=\"2.5\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
    }
  }

  svg << "<circle cx=\"" << px(scenario.goal.x) << "\" cy=\"" << py(scenario.goal.y)
      << "\" r=\"5\" fill=\"none\" stroke=\"#2a9d2a\" stroke-width=\"2\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_trajectory_csv(const std::string& path, const std::string& label,
                          const std::vector<VehicleState>& states) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto& s = states[t];
    cells.push_back({label, std::to_string(t), format_double(s.x), format_double(s.y),
                     format_double(s.vx), format_double(s.vy), format_double(s.yaw)});
  }
  write_csv(path, {"trajectory", "t", "x", "y", "vx", "vy", "yaw"}, cells);
}

}  // namespace awm
