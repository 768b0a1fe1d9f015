#include "scoreflow/diagnostics.hpp"

#include "scoreflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scoreflow {

double dist_to_support(const EmpiricalMeasure& mu, const Vector& x) {
  return (mu.points().colwise() - x).colwise().norm().minCoeff();
}

std::size_t nearest_atom(const EmpiricalMeasure& mu, const Vector& x) {
  Eigen::Index k = 0;
  (mu.points().colwise() - x).colwise().squaredNorm().minCoeff(&k);
  return static_cast<std::size_t>(k);
}

double dist_to_hull(const SupportGeometry& geom, const Vector& x) {
  if (geom.hull_vertices.empty()) throw std::invalid_argument("dist_to_hull: empty hull");
  if (geom.dim == 1) {
    double lo = geom.hull_vertices.front()(0);
    double hi = geom.hull_vertices.back()(0);
    if (lo > hi) std::swap(lo, hi);
    return std::max({lo - x(0), x(0) - hi, 0.0});
  }
  if (geom.dim == 2) return geometry::polygon_distance(geom.hull_vertices, x);
  return geometry::project_to_polytope(geom.hull_vertices, x).distance;
}

HullRateReport hull_rate_check(const Trajectory& traj, const SupportGeometry& geom) {
  HullRateReport rep;
  const double T = traj.times.front();
  rep.initial_distance = dist_to_hull(geom, traj.states.front());
  rep.slack = 1e-4 + 1e-3 * rep.initial_distance;
  rep.worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double dist = dist_to_hull(geom, traj.states[k]);
    rep.distances.push_back(dist);
    const double excess = dist - rep.initial_distance * std::sqrt(traj.times[k] / T);
    if (excess > rep.worst_violation) {
      rep.worst_violation = excess;
      rep.worst_node = k;
    }
  }
  rep.holds = rep.worst_violation <= rep.slack;
  return rep;
}

VoronoiCore voronoi_core(const EmpiricalMeasure& mu, std::size_t i) {
  if (i >= mu.size()) throw std::out_of_range("voronoi_core: index out of range");
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (j == i) continue;
    min_d2 = std::min(min_d2, (mu.point(j) - mu.point(i)).squaredNorm());
  }
  return voronoi_core(mu, i, 0.5 * min_d2);
}

VoronoiCore voronoi_core(const EmpiricalMeasure& mu, std::size_t i, double gamma) {
  if (i >= mu.size()) throw std::out_of_range("voronoi_core: index out of range");
  VoronoiCore core;
  core.index = i;
  core.gamma = gamma;
  const double wi = mu.weights()(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (j == i) continue;
    core.C_i += mu.weights()(static_cast<Eigen::Index>(j)) / wi * (mu.point(j) - mu.point(i)).norm();
  }
  return core;
}

double min_lyapunov_gap(const EmpiricalMeasure& mu, std::size_t i, const Vector& x) {
  const Eigen::RowVectorXd d2 = (mu.points().colwise() - x).colwise().squaredNorm();
  const double own = d2(static_cast<Eigen::Index>(i));
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    if (static_cast<std::size_t>(j) != i) gap = std::min(gap, d2(j) - own);
  }
  return gap;
}

bool in_core(const VoronoiCore& core, const EmpiricalMeasure& mu, const Vector& x) {
  if (core.index >= mu.size()) throw std::out_of_range("in_core: index out of range");
  return min_lyapunov_gap(mu, core.index, x) >= core.gamma;
}

double mean_shift_core_bound(const VoronoiCore& core, double t) {
  require_positive_time(t, "mean_shift_core_bound");
  if (std::isinf(core.gamma)) return 0.0;
  return core.C_i * std::exp(-core.gamma / (4.0 * t));
}

Claim2Report claim2_invariance_check(const Trajectory& traj, const EmpiricalMeasure& mu,
                                     std::size_t i) {
  const VoronoiCore core = mu.size() == 1
                               ? VoronoiCore{0, std::numeric_limits<double>::infinity(), 0.0}
                               : voronoi_core(mu, i);
  double min_dij = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (j != i) min_dij = std::min(min_dij, (mu.point(j) - mu.point(i)).norm());
  }

  Claim2Report rep;
  rep.limit_index = i;
  bool previous_in = false;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double t = traj.times[k];
    const bool inside = mu.size() == 1 || in_core(core, mu, traj.states[k]);
    const bool threshold = mu.size() == 1 || mean_shift_core_bound(core, t) <= min_dij / 8.0;
    if (!rep.entered) {
      if (inside && threshold) {
        rep.entered = true;
        rep.entry_time = t;
        rep.last_entry_time = t;
        rep.threshold_at_entry = true;
      }
    } else {
      if (!inside) ++rep.exits_after_entry;
      if (inside && !previous_in) rep.last_entry_time = t;
    }
    previous_in = inside;
  }
  rep.invariant = rep.entered && rep.exits_after_entry == 0;
  return rep;
}

Claim2Report claim2_invariance_check(const Trajectory& traj, const EmpiricalMeasure& mu) {
  return claim2_invariance_check(traj, mu, nearest_atom(mu, traj.terminal()));
}

RateFit fit_rate(const Trajectory& traj, const Vector& target) {
  constexpr double kFloor = 1e-14;
  const double t_min = traj.times.back();
  std::vector<double> xs;
  std::vector<double> ys;
  bool any_in_decade = false;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (traj.times[k] > 10.0 * t_min * (1.0 + 1e-12)) continue;
    any_in_decade = true;
    const double dist = (traj.states[k] - target).norm();
    if (dist <= kFloor) continue;
    xs.push_back(std::log(traj.times[k]));
    ys.push_back(std::log(dist));
  }
  RateFit fit;
  if (any_in_decade && xs.empty()) {
    fit.exact_hit = true;
    return fit;
  }
  if (xs.size() < 10) {
    throw std::invalid_argument("fit_rate: need at least 10 nodes in the last decade, got " +
                                std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  fit.alpha = sxy / sxx;
  fit.C = std::exp(my - fit.alpha * mx);
  fit.nodes_used = xs.size();
  return fit;
}

double neighborhood_mass(const Matrix& states, const EmpiricalMeasure& mu, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("neighborhood_mass: delta must be > 0");
  if (states.rows() == 0) return 0.0;
  if (std::isinf(delta)) return 1.0;
  const double delta2 = delta * delta;
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < states.rows(); ++r) {
    const Vector x = states.row(r).transpose();
    if ((mu.points().colwise() - x).colwise().squaredNorm().minCoeff() <= delta2) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(states.rows());
}

double neighborhood_mass(const Ensemble& ensemble, const EmpiricalMeasure& mu, double delta) {
  return neighborhood_mass(ensemble.terminal_states, mu, delta);
}

bool on_bisector(const EmpiricalMeasure& mu, const Vector& x, double tol) {
  if (mu.size() < 2) return false;
  const std::size_t i = nearest_atom(mu, x);
  const double gap = min_lyapunov_gap(mu, i, x);
  const double scale = std::max(1.0, (mu.point(i) - x).squaredNorm());
  return gap <= tol * scale;
}

HeatPoint ou_to_heat(const Vector& x_ou, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("ou_to_heat: tau must be >= 0");
  return {x_ou * std::exp(tau), 0.5 * std::expm1(2.0 * tau)};
}

OuPoint heat_to_ou(const Vector& x_heat, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("heat_to_ou: t must be >= 0");
  return {x_heat / std::sqrt(2.0 * t + 1.0), 0.5 * std::log1p(2.0 * t)};
}

double gamma_integral_quadrature(double gamma, double step) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma_integral_quadrature: gamma must be > 0");
  // The integrand decays like e^{s/2} on the left and doubly exponentially on the right;
  // the trapezoid rule converges geometrically for such analytic integrands.
  auto f = [gamma](double s) { return std::exp(0.5 * s - 0.25 * gamma * std::exp(s)); };
  const double hi = std::log(4.0 * 800.0 / gamma);
  const double lo = -90.0 + std::min(0.0, hi);
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = 0.5 * (f(lo) + f(hi));
  for (std::size_t k = 1; k < n; ++k) acc += f(lo + static_cast<double>(k) * h);
  return acc * h;
}

}  // namespace scoreflow
