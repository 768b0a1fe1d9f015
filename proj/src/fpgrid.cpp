#include "scoreflow/fpgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace scoreflow {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void normalize(GridDensity& v) {
  const double m = v.mass();
  if (!(m > 0.0)) throw NumericalError("grid density has no mass");
  for (double& x : v.values) x /= m;
}

void require_same_grid(const GridDensity& a, const GridDensity& b, const char* where) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size()) {
    throw std::invalid_argument(std::string(where) + ": grid mismatch");
  }
}

// Exact 1D empirical score without allocation; the solver calls this per face per substep.
double empirical_score_1d(const EmpiricalMeasure& mu, double x, double t) {
  const double* y = mu.points().data();
  const double* logw = mu.log_weights().data();
  const auto n = static_cast<Eigen::Index>(mu.size());
  const double inv4t = 1.0 / (4.0 * t);
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    top = std::max(top, logw[k] - (x - y[k]) * (x - y[k]) * inv4t);
  }
  double total = 0.0;
  double first = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double e = std::exp(logw[k] - (x - y[k]) * (x - y[k]) * inv4t - top);
    total += e;
    first += e * y[k];
  }
  return (first / total - x) / (2.0 * t);
}

}  // namespace

Grid make_grid(double lo, double hi, int n_cells) {
  if (!(lo < hi)) throw std::invalid_argument("make_grid: need lo < hi");
  if (n_cells < 8) throw std::invalid_argument("make_grid: need at least 8 cells");
  return Grid{lo, hi, n_cells};
}

Grid truncated_grid(double radius, double T, int n_cells) {
  const double half = radius + 6.0 * std::sqrt(2.0 * T);
  return make_grid(-half, half, n_cells);
}

double GridDensity::mass() const {
  return std::accumulate(values.begin(), values.end(), 0.0) * grid.h();
}

double FpSolution::max_mass_drift() const {
  double worst = 0.0;
  for (double m : mass_before_renormalization) worst = std::max(worst, std::abs(m - 1.0));
  return worst;
}

GridDensity discretize_gaussian(const Grid& grid, double mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("discretize_gaussian: variance must be > 0");
  const double sd = std::sqrt(variance);
  GridDensity v{grid, std::vector<double>(static_cast<std::size_t>(grid.n_cells)), 0.0};
  const double h = grid.h();
  for (int i = 0; i < grid.n_cells; ++i) {
    // Symmetric evaluation keeps reflection symmetry exact on symmetric grids.
    const double a = (grid.face(i) - mean) / sd;
    const double b = (grid.face(i + 1) - mean) / sd;
    const double p = (a >= 0.0) ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a);
    v.values[static_cast<std::size_t>(i)] = p / h;
  }
  normalize(v);
  return v;
}

GridDensity discretize_heat_solution(const Grid& grid, const EmpiricalMeasure& mu, double t) {
  require_positive_time(t, "discretize_heat_solution");
  if (mu.dim() != 1) throw std::invalid_argument("discretize_heat_solution: measure must be 1D");
  const double sd = std::sqrt(2.0 * t);
  GridDensity v{grid, std::vector<double>(static_cast<std::size_t>(grid.n_cells), 0.0), t};
  const double h = grid.h();
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double y = mu.points()(0, static_cast<Eigen::Index>(k));
    const double w = mu.weights()(static_cast<Eigen::Index>(k));
    for (int i = 0; i < grid.n_cells; ++i) {
      const double a = (grid.face(i) - y) / sd;
      const double b = (grid.face(i + 1) - y) / sd;
      const double p = (a >= 0.0) ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a);
      v.values[static_cast<std::size_t>(i)] += w * p / h;
    }
  }
  normalize(v);
  return v;
}

FpSolution solve_backward_fp(const ScoreField& field, const GridDensity& v_T,
                             const TimeSchedule& schedule, double epsilon,
                             const FpOptions& options) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("solve_backward_fp: epsilon must be >= 0");
  if (field.dim() != 1) throw std::invalid_argument("solve_backward_fp: only 1D fields are supported");
  if (schedule.nodes.size() < 2) throw std::invalid_argument("solve_backward_fp: schedule too short");
  if (static_cast<int>(v_T.values.size()) != v_T.grid.n_cells) {
    throw std::invalid_argument("solve_backward_fp: value count does not match grid");
  }

  const Grid& grid = v_T.grid;
  const int n = grid.n_cells;
  const double h = grid.h();
  const double transport = 1.0 + epsilon;

  FpSolution sol;
  std::vector<double> v = v_T.values;
  {
    GridDensity first{grid, v, schedule.nodes.front()};
    sol.mass_before_renormalization.push_back(first.mass());
    normalize(first);
    v = first.values;
    sol.snapshots.push_back(std::move(first));
  }

  std::vector<double> velocity(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> flux(static_cast<std::size_t>(n + 1), 0.0);
  Vector probe(1);
  const EmpiricalMeasure* exact =
      field.kind() == ScoreKind::EmpiricalExact && field.measure() ? field.measure().get() : nullptr;

  for (std::size_t k = 1; k < schedule.nodes.size(); ++k) {
    double t = schedule.nodes[k - 1];
    const double t_end = schedule.nodes[k];
    while (t > t_end) {
      double vmax = 0.0;
      for (int f = 1; f < n; ++f) {
        double a = 0.0;
        if (exact) {
          a = transport * empirical_score_1d(*exact, grid.face(f), t);
        } else {
          probe(0) = grid.face(f);
          a = transport * field.eval(probe, t)(0);
        }
        velocity[static_cast<std::size_t>(f)] = a;
        vmax = std::max(vmax, std::abs(a));
      }
      if (!std::isfinite(vmax)) throw NumericalError("non-finite velocity", static_cast<std::ptrdiff_t>(k));

      // Positivity: the total outflow fraction of any cell stays below one.
      double dtau = t - t_end;
      const double rate = 2.0 * vmax / h + 2.0 * epsilon / (h * h);
      if (rate > 0.0) dtau = std::min(dtau, 1.0 / rate);
      if (vmax > 0.0) dtau = std::min(dtau, options.cfl * h / vmax);
      if (epsilon > 0.0) dtau = std::min(dtau, options.diffusion_number * h * h / epsilon);
      if (t - dtau < t_end || (t - dtau - t_end) < 1e-14 * t_end) dtau = t - t_end;

      for (int f = 1; f < n; ++f) {
        const auto fi = static_cast<std::size_t>(f);
        const double a = velocity[fi];
        const double left = v[fi - 1];
        const double right = v[fi];
        flux[fi] = (a > 0.0 ? a * left : a * right) - epsilon * (right - left) / h;
      }
      const double ratio = dtau / h;
      for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        v[ii] -= ratio * (flux[ii + 1] - flux[ii]);
      }
      for (double& x : v) {
        if (x < 0.0) {
          if (x < -1e-10) ++sol.clipped_cells;
          sol.most_negative = std::min(sol.most_negative, x);
          x = 0.0;
        }
      }

      t -= dtau;
      if (++sol.substeps > options.max_substeps) {
        throw NumericalError("CFL substep cap exceeded", static_cast<std::ptrdiff_t>(k));
      }
    }

    GridDensity snap{grid, v, t_end};
    sol.mass_before_renormalization.push_back(snap.mass());
    normalize(snap);
    v = snap.values;
    sol.snapshots.push_back(std::move(snap));
  }
  return sol;
}

double lp_norm(const GridDensity& v, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
  if (std::isinf(p)) throw std::invalid_argument("lp_norm: p = infinity is not supported");
  double acc = 0.0;
  for (double x : v.values) acc += std::pow(std::abs(x), p);
  return std::pow(acc * v.grid.h(), 1.0 / p);
}

double kl_divergence(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a, b, "kl_divergence");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double ai = a.values[i];
    if (ai <= kDensityFloor) continue;
    acc += ai * std::log(ai / std::max(b.values[i], kDensityFloor));
  }
  return acc * a.grid.h();
}

double relative_fisher(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a, b, "relative_fisher");
  const std::size_t n = a.values.size();
  const double h = a.grid.h();
  std::vector<double> log_ratio(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_ratio[i] = std::log(std::max(a.values[i], kDensityFloor)) -
                   std::log(std::max(b.values[i], kDensityFloor));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a.values[i] <= kDensityFloor) continue;
    double grad = 0.0;
    if (i == 0) {
      grad = (log_ratio[1] - log_ratio[0]) / h;
    } else if (i + 1 == n) {
      grad = (log_ratio[n - 1] - log_ratio[n - 2]) / h;
    } else {
      grad = (log_ratio[i + 1] - log_ratio[i - 1]) / (2.0 * h);
    }
    acc += a.values[i] * grad * grad;
  }
  return acc * h;
}

KlIdentityReport kl_identity_residual(const EmpiricalMeasure& mu, const GridDensity& v_T,
                                      const TimeSchedule& schedule, double epsilon,
                                      const std::optional<ScoreField>& candidate,
                                      const FpOptions& options) {
  const ScoreField exact = ScoreField::empirical(mu);
  const ScoreField& field = candidate ? *candidate : exact;

  KlIdentityReport rep;
  rep.solution = solve_backward_fp(field, v_T, schedule, epsilon, options);
  const auto& snaps = rep.solution.snapshots;
  Vector probe(1);
  for (const auto& v : snaps) {
    const GridDensity u = discretize_heat_solution(v.grid, mu, v.time);
    rep.times.push_back(v.time);
    rep.kl.push_back(kl_divergence(v, u));
    rep.fisher.push_back(relative_fisher(v, u));
    if (candidate) {
      double acc = 0.0;
      for (int i = 0; i < u.grid.n_cells; ++i) {
        probe(0) = u.grid.center(i);
        const double diff = exact.eval(probe, v.time)(0) - candidate->eval(probe, v.time)(0);
        acc += u.values[static_cast<std::size_t>(i)] * diff * diff;
      }
      rep.score_mismatch.push_back(acc * u.grid.h());
    }
  }

  const std::size_t m = rep.times.size();
  rep.total_change = rep.kl.front() - rep.kl.back();
  const double scale = std::max(std::abs(rep.total_change), 1e-300);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double dt = rep.times[k] - rep.times[k + 1];
    const double change = rep.kl[k] - rep.kl[k + 1];
    const double predicted = epsilon * 0.5 * (rep.fisher[k] + rep.fisher[k + 1]) * dt;
    rep.interval_change.push_back(change);
    rep.interval_predicted.push_back(predicted);
    rep.interval_residual.push_back(std::abs(change - predicted));
    rep.worst_relative_residual = std::max(rep.worst_relative_residual, std::abs(change - predicted) / scale);
  }
  // Nodes run from T downward, so index j > i means t_j < t_i.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      rep.worst_monotonicity_violation = std::max(rep.worst_monotonicity_violation, rep.kl[j] - rep.kl[i]);
    }
    if (rep.kl.front() > 0.0) {
      rep.max_relative_drift = std::max(rep.max_relative_drift, std::abs(rep.kl[i] - rep.kl.front()) / rep.kl.front());
    }
  }
  return rep;
}

}  // namespace scoreflow
