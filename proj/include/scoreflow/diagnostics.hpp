#pragma once

#include "scoreflow/reverse.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace scoreflow {

/// min_k |x - y_k|.
double dist_to_support(const EmpiricalMeasure& mu, const Vector& x);

/// Index of the atom nearest to x (ties go to the lowest index).
std::size_t nearest_atom(const EmpiricalMeasure& mu, const Vector& x);

/// Distance to conv(S): exact for d <= 2, Wolfe's min-norm point otherwise.
double dist_to_hull(const SupportGeometry& geom, const Vector& x);

struct HullRateReport {
  double initial_distance = 0.0;   // d(x_T, K)
  double slack = 0.0;              // 1e-4 + 1e-3 d(x_T, K)
  double worst_violation = 0.0;    // max_t d(X_t, K) - d(x_T, K) sqrt(t/T), may be negative
  std::size_t worst_node = 0;
  bool holds = true;               // worst_violation <= slack
  std::vector<double> distances;
};

/// Node-wise check of d(X_t, K) <= d(x_T, K) sqrt(t / T) along an ODE path.
HullRateReport hull_rate_check(const Trajectory& traj, const SupportGeometry& geom);

/// gamma-Voronoi core V_i(gamma) = {x : |x - y_j|^2 - |x - y_i|^2 >= gamma for j != i}.
struct VoronoiCore {
  std::size_t index = 0;
  double gamma = 0.0;   // +infinity for a single-atom measure
  double C_i = 0.0;     // sum_{j != i} (w_j / w_i) |y_j - y_i|
};

/// Core with gamma = min_{j != i} |y_i - y_j|^2 / 2.
VoronoiCore voronoi_core(const EmpiricalMeasure& mu, std::size_t i);

/// Same prefactor with an explicit gamma (gamma = 0 gives the classical Voronoi cell).
VoronoiCore voronoi_core(const EmpiricalMeasure& mu, std::size_t i, double gamma);

/// psi_j(x) = |x - y_j|^2 - |x - y_i|^2 minimized over j != i (+inf for one atom).
double min_lyapunov_gap(const EmpiricalMeasure& mu, std::size_t i, const Vector& x);

bool in_core(const VoronoiCore& core, const EmpiricalMeasure& mu, const Vector& x);

/// Exponential bound C_i exp(-gamma / (4t)) on |m(x, t) - y_i| inside the core.
double mean_shift_core_bound(const VoronoiCore& core, double t);

struct Claim2Report {
  std::size_t limit_index = 0;
  bool entered = false;                  // some node lies in the core with the threshold met
  std::optional<double> entry_time;      // first such node, t*
  std::optional<double> last_entry_time; // latest re-entry (equals entry_time when invariant)
  std::size_t exits_after_entry = 0;     // recorded nodes t < t* outside the core
  bool threshold_at_entry = false;       // C_i exp(-gamma/(4 t*)) <= min_j d_ij / 8
  bool invariant = false;                // entered and no exits afterwards
};

/// Core invariance along a trajectory for the core of atom i.
Claim2Report claim2_invariance_check(const Trajectory& traj, const EmpiricalMeasure& mu,
                                     std::size_t i);

/// Claim-2 check for the atom nearest to the terminal state.
Claim2Report claim2_invariance_check(const Trajectory& traj, const EmpiricalMeasure& mu);

struct RateFit {
  double alpha = 0.0;
  double C = 0.0;
  std::size_t nodes_used = 0;
  bool exact_hit = false;  // every distance fell below the 1e-14 floor
};

/// Least squares of log |X_t - target| against log t over the last decade of nodes.
RateFit fit_rate(const Trajectory& traj, const Vector& target);

/// Fraction of rows of `states` within distance delta of the atoms.
double neighborhood_mass(const Matrix& states, const EmpiricalMeasure& mu, double delta);
double neighborhood_mass(const Ensemble& ensemble, const EmpiricalMeasure& mu, double delta);

/// True if x_T is (within tol) equidistant, in the psi sense, from its two nearest atoms.
bool on_bisector(const EmpiricalMeasure& mu, const Vector& x, double tol = 1e-9);

/// Self-similar map between Ornstein-Uhlenbeck time tau and heat time t = (e^{2 tau} - 1)/2.
struct HeatPoint {
  Vector x;
  double t = 0.0;
};
struct OuPoint {
  Vector x;
  double tau = 0.0;
};

HeatPoint ou_to_heat(const Vector& x_ou, double tau);
OuPoint heat_to_ou(const Vector& x_heat, double t);

/// Trapezoid quadrature of the integral over R of exp(s/2 - (gamma/4) e^s) ds.
double gamma_integral_quadrature(double gamma, double step = 1e-3);

}  // namespace scoreflow
