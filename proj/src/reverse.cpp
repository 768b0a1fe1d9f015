#include "scoreflow/reverse.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace scoreflow {
namespace {

void check_finite(const Vector& x, std::size_t node, double t) {
  if (!x.allFinite()) {
    throw NumericalError("non-finite state at node " + std::to_string(node) +
                             " (t = " + std::to_string(t) + ")",
                         static_cast<std::ptrdiff_t>(node));
  }
}

void check_start(const ScoreField& field, const Vector& x_T, const TimeSchedule& schedule) {
  if (x_T.size() != field.dim()) throw std::invalid_argument("initial state dimension mismatch");
  if (schedule.nodes.size() < 2) throw std::invalid_argument("schedule needs at least two nodes");
}

}  // namespace

const char* to_string(Spacing spacing) noexcept {
  switch (spacing) {
    case Spacing::Geometric:
      return "geometric";
    case Spacing::LogUniform:
      return "log-uniform";
    case Spacing::Uniform:
      return "uniform";
  }
  return "unknown";
}

Spacing parse_spacing(const std::string& name) {
  if (name == "geometric") return Spacing::Geometric;
  if (name == "log-uniform") return Spacing::LogUniform;
  if (name == "uniform") return Spacing::Uniform;
  throw std::invalid_argument("unknown schedule spacing \"" + name + "\"");
}

TimeSchedule make_schedule(double T, double t_min, std::size_t n_steps, Spacing spacing) {
  if (!(t_min > 0.0)) throw std::invalid_argument("make_schedule: t_min must be > 0");
  if (!(t_min < T)) throw std::invalid_argument("make_schedule: t_min must be < T");
  if (n_steps < 1) throw std::invalid_argument("make_schedule: n_steps must be >= 1");

  TimeSchedule s;
  s.T = T;
  s.t_min = t_min;
  s.spacing = spacing;
  s.nodes.resize(n_steps + 1);
  const double n = static_cast<double>(n_steps);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double frac = static_cast<double>(k) / n;
    switch (spacing) {
      case Spacing::Geometric:
        s.nodes[k] = T * std::pow(t_min / T, frac);
        break;
      case Spacing::LogUniform:
        s.nodes[k] = std::exp(std::log(T) + frac * (std::log(t_min) - std::log(T)));
        break;
      case Spacing::Uniform:
        s.nodes[k] = T + frac * (t_min - T);
        break;
    }
  }
  s.nodes.front() = T;
  s.nodes.back() = t_min;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    if (!(s.nodes[k] < s.nodes[k - 1])) {
      throw std::invalid_argument("make_schedule: nodes are not strictly decreasing");
    }
  }
  return s;
}

Trajectory integrate_ode(const ScoreField& field, const Vector& x_T, const TimeSchedule& schedule) {
  check_start(field, x_T, schedule);
  Trajectory traj;
  traj.times = schedule.nodes;
  traj.states.reserve(schedule.nodes.size());
  traj.states.push_back(x_T);
  check_finite(x_T, 0, schedule.nodes.front());

  // dX/dtau = -t s(X, t) with t = e^tau.
  auto rhs = [&field](const Vector& x, double tau) -> Vector {
    const double t = std::exp(tau);
    return -t * field.eval(x, t);
  };

  Vector x = x_T;
  for (std::size_t k = 1; k < schedule.nodes.size(); ++k) {
    const double tau0 = std::log(schedule.nodes[k - 1]);
    const double tau1 = std::log(schedule.nodes[k]);
    const double h = tau1 - tau0;
    const Vector k1 = rhs(x, tau0);
    const Vector k2 = rhs(x + 0.5 * h * k1, tau0 + 0.5 * h);
    const Vector k3 = rhs(x + 0.5 * h * k2, tau0 + 0.5 * h);
    const Vector k4 = rhs(x + h * k3, tau1);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_finite(x, k, schedule.nodes[k]);
    traj.states.push_back(x);
  }
  return traj;
}

Trajectory integrate_sde(const ScoreField& field, const Vector& x_T, const TimeSchedule& schedule,
                         double epsilon, Seed seed) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("integrate_sde: epsilon must be >= 0");
  check_start(field, x_T, schedule);
  Trajectory traj;
  traj.times = schedule.nodes;
  traj.epsilon = epsilon;
  traj.seed = seed;
  traj.states.reserve(schedule.nodes.size());
  traj.states.push_back(x_T);
  check_finite(x_T, 0, schedule.nodes.front());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = x_T.size();
  Vector noise(d);
  Vector x = x_T;
  for (std::size_t k = 1; k < schedule.nodes.size(); ++k) {
    const double t = schedule.nodes[k - 1];
    const double dt = t - schedule.nodes[k];
    Vector drift = field.eval(x, t);
    x += ((1.0 + epsilon) * dt) * drift;
    if (epsilon > 0.0) {
      for (Eigen::Index i = 0; i < d; ++i) noise(i) = normal(rng);
      x += std::sqrt(2.0 * epsilon * dt) * noise;
    }
    check_finite(x, k, schedule.nodes[k]);
    traj.states.push_back(x);
  }
  return traj;
}

Seed trajectory_seed(Seed master, std::size_t index) noexcept {
  return derive_seed(master, 2 * static_cast<std::uint64_t>(index));
}

Vector draw_initial_state(const InitSpec& init, Seed master, std::size_t index, int dim) {
  if (const auto* pts = std::get_if<PointsInit>(&init)) {
    if (pts->points.empty()) throw std::invalid_argument("points init is empty");
    const Vector& p = pts->points[index % pts->points.size()];
    if (p.size() != dim) throw std::invalid_argument("points init dimension mismatch");
    return p;
  }
  const auto& g = std::get<GaussianInit>(init);
  if (g.mean.size() != dim) throw std::invalid_argument("gaussian init mean dimension mismatch");
  if (!(g.sigma >= 0.0)) throw std::invalid_argument("gaussian init sigma must be >= 0");
  std::mt19937_64 rng(derive_seed(master, 2 * static_cast<std::uint64_t>(index) + 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x(i) = g.mean(i) + g.sigma * normal(rng);
  return x;
}

std::size_t node_index(const TimeSchedule& schedule, double t) {
  for (std::size_t k = 0; k < schedule.nodes.size(); ++k) {
    if (std::abs(schedule.nodes[k] - t) <= 1e-9 * t) return k;
  }
  throw std::invalid_argument("time " + std::to_string(t) + " is not a schedule node");
}

Ensemble run_ensemble(const ScoreField& field, const InitSpec& init, const TimeSchedule& schedule,
                      double epsilon, std::size_t n, Seed seed, const EnsembleOptions& options) {
  if (n == 0) throw std::invalid_argument("run_ensemble: n must be >= 1");
  const int d = field.dim();

  Ensemble ens;
  ens.schedule = schedule;
  ens.epsilon = epsilon;
  ens.seed = seed;
  ens.terminal_states.resize(static_cast<Eigen::Index>(n), d);
  ens.initial_states.resize(n);
  if (options.keep_paths) ens.trajectories.resize(n);
  std::vector<std::size_t> snapshot_nodes;
  for (double t : options.snapshot_times) {
    snapshot_nodes.push_back(node_index(schedule, t));
    ens.snapshots.emplace_back(static_cast<Eigen::Index>(n), d);
  }

  unsigned workers = options.threads ? options.threads : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(std::min<std::size_t>(n, 64)));

  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = n;

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      try {
        Vector x0 = draw_initial_state(init, seed, i, d);
        Trajectory traj = integrate_sde(field, x0, schedule, epsilon, trajectory_seed(seed, i));
        ens.initial_states[i] = std::move(x0);
        ens.terminal_states.row(static_cast<Eigen::Index>(i)) = traj.terminal().transpose();
        for (std::size_t s = 0; s < snapshot_nodes.size(); ++s) {
          ens.snapshots[s].row(static_cast<Eigen::Index>(i)) = traj.states[snapshot_nodes[s]].transpose();
        }
        if (options.keep_paths) ens.trajectories[i] = std::move(traj);
      } catch (const NumericalError& e) {
        std::lock_guard lock(error_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::make_exception_ptr(NumericalError(
              "trajectory " + std::to_string(i) + ": " + e.what(), static_cast<std::ptrdiff_t>(i)));
        }
        return;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
        return;
      }
    }
  };

  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return ens;
}

}  // namespace scoreflow
