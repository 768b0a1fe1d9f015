#include "scoreflow/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <ostream>

namespace scoreflow::io {

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& out, const std::vector<Trajectory>& trajectories,
                          bool header) {
  if (header) {
    out << "traj_id,t";
    const auto d = trajectories.empty() || trajectories.front().states.empty()
                       ? 0
                       : trajectories.front().states.front().size();
    for (Eigen::Index i = 0; i < d; ++i) out << ",x" << (i + 1);
    out << '\n';
  }
  for (std::size_t id = 0; id < trajectories.size(); ++id) {
    const auto& tr = trajectories[id];
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      out << id << ',' << format_double(tr.times[k]);
      for (Eigen::Index i = 0; i < tr.states[k].size(); ++i) out << ',' << format_double(tr.states[k](i));
      out << '\n';
    }
  }
}

void write_trajectory_jsonl(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  for (std::size_t id = 0; id < trajectories.size(); ++id) {
    const auto& tr = trajectories[id];
    nlohmann::json xs = nlohmann::json::array();
    for (const auto& s : tr.states) xs.push_back(std::vector<double>(s.data(), s.data() + s.size()));
    nlohmann::json j = {{"traj_id", id}, {"epsilon", tr.epsilon}, {"t", tr.times}, {"x", xs}};
    j["seed"] = tr.seed ? nlohmann::json(*tr.seed) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
}

void write_states_csv(std::ostream& out, const Matrix& states) {
  out << "traj_id";
  for (Eigen::Index i = 0; i < states.cols(); ++i) out << ",x" << (i + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < states.rows(); ++r) {
    out << r;
    for (Eigen::Index i = 0; i < states.cols(); ++i) out << ',' << format_double(states(r, i));
    out << '\n';
  }
}

void write_density_csv(std::ostream& out, const GridDensity& density) {
  out << "x,value\n";
  for (int i = 0; i < density.grid.n_cells; ++i) {
    out << format_double(density.grid.center(i)) << ','
        << format_double(density.values[static_cast<std::size_t>(i)]) << '\n';
  }
}

}  // namespace scoreflow::io
