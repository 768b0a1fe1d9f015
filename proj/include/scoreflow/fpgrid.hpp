#pragma once

#include "scoreflow/reverse.hpp"

#include <optional>
#include <vector>

namespace scoreflow {

/// Uniform 1D cell grid on [lo, hi].
struct Grid {
  double lo = -1.0;
  double hi = 1.0;
  int n_cells = 8;

  double h() const noexcept { return (hi - lo) / n_cells; }
  double center(int i) const noexcept { return lo + (i + 0.5) * h(); }
  double face(int i) const noexcept { return lo + i * h(); }
  bool operator==(const Grid&) const = default;
};

Grid make_grid(double lo, double hi, int n_cells);

/// [-(R + 6 sqrt(2T)), R + 6 sqrt(2T)]: heat-kernel tails are below 1e-8 outside for t <= T.
Grid truncated_grid(double radius, double T, int n_cells);

struct GridDensity {
  Grid grid;
  std::vector<double> values;
  double time = 0.0;

  double mass() const;
};

/// Cell averages of the N(mean, variance) density, renormalized to unit grid mass.
GridDensity discretize_gaussian(const Grid& grid, double mean, double variance);

/// Cell averages of u(., t) = G_t * u0 for a one-dimensional measure, renormalized.
GridDensity discretize_heat_solution(const Grid& grid, const EmpiricalMeasure& mu, double t);

struct FpOptions {
  double cfl = 0.5;               // |a| dtau <= cfl h
  double diffusion_number = 0.25; // eps dtau / h^2 <= diffusion_number
  std::size_t max_substeps = 20'000'000;
};

struct FpSolution {
  std::vector<GridDensity> snapshots;            // one per schedule node, T first
  std::vector<double> mass_before_renormalization;
  std::size_t substeps = 0;
  std::size_t clipped_cells = 0;                 // cells that went below -1e-10
  double most_negative = 0.0;

  double max_mass_drift() const;
};

/// Marches dv/dtau = -div((1 + eps) s v) + eps v'' from t = T down the schedule
/// (tau = T - t) with conservative first-order upwind fluxes, explicit centred
/// diffusion and zero-flux walls. Substeps satisfy the CFL and diffusion limits
/// and keep the update positive; mass is renormalized at every output node.
FpSolution solve_backward_fp(const ScoreField& field, const GridDensity& v_T,
                             const TimeSchedule& schedule, double epsilon,
                             const FpOptions& options = {});

/// (sum |v|^p h)^{1/p} for finite p >= 1.
double lp_norm(const GridDensity& v, double p);

inline constexpr double kDensityFloor = 1e-300;

/// sum a log(a / b) h; cells with a <= floor contribute nothing, b is floored.
double kl_divergence(const GridDensity& a, const GridDensity& b);

/// sum a |d/dx log(a / b)|^2 h with centred differences of the log-ratio.
double relative_fisher(const GridDensity& a, const GridDensity& b);

struct KlIdentityReport {
  std::vector<double> times;
  std::vector<double> kl;                 // KL(v(t) || u(t)) at each node
  std::vector<double> fisher;             // relative Fisher information at each node
  std::vector<double> interval_change;    // KL(t_k) - KL(t_{k+1})
  std::vector<double> interval_predicted; // eps * trapezoid of the Fisher information
  std::vector<double> interval_residual;  // |change - predicted|
  std::vector<double> score_mismatch;     // int |s - s_theta|^2 u dx, candidate runs only
  double total_change = 0.0;              // KL(T) - KL(t_min)
  double worst_relative_residual = 0.0;   // max residual / max(|total_change|, 1e-300)
  double worst_monotonicity_violation = 0.0;  // max over t1 <= t2 of KL(t1) - KL(t2)
  double max_relative_drift = 0.0;        // max |KL_k - KL_0| / KL_0
  FpSolution solution;
};

/// Solves the backward equation from v_T and compares it with the exact heat flow u
/// of `mu`. With `candidate`, v follows the candidate field while u stays exact.
KlIdentityReport kl_identity_residual(const EmpiricalMeasure& mu, const GridDensity& v_T,
                                      const TimeSchedule& schedule, double epsilon,
                                      const std::optional<ScoreField>& candidate = std::nullopt,
                                      const FpOptions& options = {});

}  // namespace scoreflow
