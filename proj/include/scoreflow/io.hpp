#pragma once

#include "scoreflow/fpgrid.hpp"

#include <iosfwd>
#include <string>

namespace scoreflow::io {

/// Shortest round-trip decimal form, so identical doubles always print identically.
std::string format_double(double x);

/// Rows "traj_id,t,x1,...,xd", one per node, trajectories in index order.
void write_trajectory_csv(std::ostream& out, const std::vector<Trajectory>& trajectories,
                          bool header = true);

/// One JSON object per trajectory: {"traj_id", "epsilon", "seed", "t": [...], "x": [[...]]}.
void write_trajectory_jsonl(std::ostream& out, const std::vector<Trajectory>& trajectories);

/// Rows "traj_id,x1,...,xd" of the terminal states.
void write_states_csv(std::ostream& out, const Matrix& states);

/// Rows "x,value" at cell centres.
void write_density_csv(std::ostream& out, const GridDensity& density);

}  // namespace scoreflow::io
