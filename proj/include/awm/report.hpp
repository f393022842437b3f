#pragma once

#include <string>
#include <vector>

#include "awm/mpc.hpp"
#include "awm/rollout.hpp"
#include "awm/scenario.hpp"

namespace awm {

// Fixed formatting so identical runs produce byte-identical reports.
std::string format_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_eval_report(const std::string& path, const std::vector<EvalRow>& rows);
void write_mpc_report(const std::string& path, const std::vector<MpcEvalRow>& rows);

// Standalone overlay of road corridor, expert, realized trajectory, and
// imagined futures (scattered circles), no external references.
std::string render_scenario_svg(const Scenario& scenario,
                                const std::vector<VehicleState>& realized,
                                const std::vector<ImaginedRollout>& imagined);

void write_trajectory_csv(const std::string& path, const std::string& label,
                          const std::vector<VehicleState>& states);

}  // namespace awm
