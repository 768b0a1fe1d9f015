#pragma once

#include "scoreflow/score.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace scoreflow {

enum class Spacing { Geometric, LogUniform, Uniform };

const char* to_string(Spacing spacing) noexcept;
Spacing parse_spacing(const std::string& name);

/// Strictly decreasing time nodes from T down to the early-stopping time t_min.
struct TimeSchedule {
  double T = 1.0;
  double t_min = 1e-3;
  std::vector<double> nodes;
  Spacing spacing = Spacing::Geometric;

  std::size_t steps() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
};

/// Geometric: t_k = T (t_min / T)^{k/n}. Log-uniform: exp of evenly spaced log t.
TimeSchedule make_schedule(double T, double t_min, std::size_t n_steps,
                           Spacing spacing = Spacing::Geometric);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  double epsilon = 0.0;
  std::optional<Seed> seed;

  const Vector& terminal() const { return states.back(); }
};

/// dX/dt = -s(X, t) from T to t_min by classical RK4 in tau = log t.
///
/// In log time the drift is -t s(X, t) = (X - m(X, t)) / 2 for empirical scores,
/// which is bounded, so node-to-node steps stay accurate as t -> 0.
Trajectory integrate_ode(const ScoreField& field, const Vector& x_T, const TimeSchedule& schedule);

/// Euler-Maruyama for dX = -(1 + eps) s dt + sqrt(2 eps) dW marched backward in t:
/// X_{t - dt} = X_t + (1 + eps) s(X_t, t) dt + sqrt(2 eps dt) xi.
Trajectory integrate_sde(const ScoreField& field, const Vector& x_T, const TimeSchedule& schedule,
                         double epsilon, Seed seed);

/// Isotropic Gaussian initial law N(mean, sigma^2 I).
struct GaussianInit {
  Vector mean;
  double sigma = 1.0;
};
/// Explicit initial points, used in order (cycled if fewer than n).
struct PointsInit {
  std::vector<Vector> points;
};
using InitSpec = std::variant<GaussianInit, PointsInit>;

struct Ensemble {
  std::vector<Trajectory> trajectories;  // empty unless paths were kept
  Matrix terminal_states;                // n x d, row i from trajectory i
  std::vector<Vector> initial_states;
  std::vector<Matrix> snapshots;         // n x d states at EnsembleOptions::snapshot_times
  TimeSchedule schedule;
  double epsilon = 0.0;
  Seed seed = 0;
};

struct EnsembleOptions {
  bool keep_paths = true;
  unsigned threads = 0;  // 0: hardware concurrency
  /// Intermediate schedule nodes whose states are recorded for every trajectory.
  std::vector<double> snapshot_times;
};

/// Index of the schedule node equal to t up to relative 1e-9; throws if there is none.
std::size_t node_index(const TimeSchedule& schedule, double t);

/// Seed of trajectory `index` in an ensemble with master seed `master`.
Seed trajectory_seed(Seed master, std::size_t index) noexcept;

/// Initial state of trajectory `index`, drawn from its own stream.
Vector draw_initial_state(const InitSpec& init, Seed master, std::size_t index, int dim);

/// n independent SDE trajectories (explicit Euler when epsilon = 0). Output order is by index
/// regardless of threading, and every trajectory depends only on (master seed, index).
Ensemble run_ensemble(const ScoreField& field, const InitSpec& init, const TimeSchedule& schedule,
                      double epsilon, std::size_t n, Seed seed, const EnsembleOptions& options = {});

}  // namespace scoreflow
