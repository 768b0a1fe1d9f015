// Acceptance suite: one PASS/FAIL line per criterion, each with its measured values and
// wall-clock time against the criterion's time budget.

#include "scoreflow/diagnostics.hpp"
#include "scoreflow/fpgrid.hpp"
#include "scoreflow/losses.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace scoreflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

EmpiricalMeasure figure1_measure() {
  return EmpiricalMeasure({vec({-5.0}), vec({0.0}), vec({5.0})}, {0.7, 0.3, 0.1});
}

EmpiricalMeasure two_dirac_measure() {
  return EmpiricalMeasure({vec({-1.0, 0.0}), vec({1.0, 0.0})}, {0.5, 0.5});
}

Vector uniform_vector(std::mt19937_64& rng, int d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = u(rng);
  return v;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

EmpiricalMeasure random_measure(std::mt19937_64& rng, int d, int n, double spread) {
  std::vector<Vector> pts;
  std::vector<double> w;
  std::uniform_real_distribution<double> uw(0.1, 1.0);
  for (int k = 0; k < n; ++k) {
    pts.push_back(uniform_vector(rng, d, -spread, spread));
    w.push_back(uw(rng));
  }
  return EmpiricalMeasure(pts, w);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome li_yau() {
  std::mt19937_64 rng(101);
  double worst = std::numeric_limits<double>::infinity();  // min of margin * t / d
  const auto fig1 = ScoreField::empirical(figure1_measure());
  const auto lem = ScoreField::empirical(lemniscate_dataset(2000, 1.0, 7));
  std::size_t probes = 0;
  for (int i = 0; i < 5000; ++i) {
    const double t = log_uniform(rng, 1e-6, 1.0);
    worst = std::min(worst, li_yau_margin(fig1, uniform_vector(rng, 1, -8.0, 8.0), t) * t);
    worst = std::min(worst, li_yau_margin(lem, uniform_vector(rng, 2, -1.5, 1.5), t) * t / 2.0);
    probes += 2;
  }
  double single = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + i % 3;
    const auto field = ScoreField::empirical(EmpiricalMeasure({uniform_vector(rng, d, -3.0, 3.0)}));
    single = std::max(single, std::abs(li_yau_margin(field, uniform_vector(rng, d, -5.0, 5.0),
                                                     log_uniform(rng, 1e-6, 1.0))));
  }
  const bool pass = worst >= -1e-9 && single <= 1e-9;
  return {pass, fmt("%.0f probes, min t*margin/d = %.3g (>= -1e-9); single-Dirac max |margin| = %.3g (<= 1e-9)",
                    static_cast<double>(probes), worst, single)};
}

Outcome score_consistency() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + i % 3;
    const auto mu = i % 4 == 0 && d == 1 ? figure1_measure() : random_measure(rng, d, 4, 2.0);
    const Vector x = uniform_vector(rng, mu.dim(), -3.0, 3.0);
    const double t = log_uniform(rng, 1e-4, 1.0);
    const Vector s = empirical_score(mu, x, t);
    const double h = 1e-5 * std::min(1.0, 10.0 * std::sqrt(t));
    Vector fd(mu.dim());
    for (int j = 0; j < mu.dim(); ++j) {
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      fd(j) = (log_density(mu, xp, t) - log_density(mu, xm, t)) / (2.0 * h);
    }
    worst = std::max(worst, (fd - s).norm() / std::max(1.0, s.norm()));
  }
  return {worst <= 1e-6, fmt("1000 probes, worst relative error %.3g (<= 1e-6)", worst)};
}

Outcome hessian_bounds() {
  std::mt19937_64 rng(303);
  double worst_low = 0.0;
  double worst_high = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + i % 3;
    const auto mu = d == 1 && i % 2 == 0 ? figure1_measure() : random_measure(rng, d, 6, 2.0);
    const double R = mu.points().colwise().norm().maxCoeff();
    const double t = log_uniform(rng, 1e-4, 1.0);
    const Matrix hess = log_density_jet(mu, uniform_vector(rng, d, -6.0, 6.0), t).hessian;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(hess);
    // Violations in units of 1/t^2.
    worst_low = std::max(worst_low, (-1.0 / (2.0 * t) - eig.eigenvalues().minCoeff()) * t * t);
    worst_high = std::max(worst_high,
                          (eig.eigenvalues().maxCoeff() - (-1.0 / (2.0 * t) + R * R / (4.0 * t * t))) * t * t);
  }
  const bool pass = worst_low <= 1e-9 && worst_high <= 1e-9;
  return {pass, fmt("1000 probes, worst t^2 * violation: lower %.3g, upper %.3g (<= 1e-9)", worst_low,
                    worst_high)};
}

Outcome energy_estimate() {
  const auto mu = figure1_measure();
  const auto field = ScoreField::empirical(mu);
  const Grid grid = truncated_grid(5.0, 1.0, 512);
  const auto sched = make_schedule(1.0, 0.01, 20);
  const auto v_T = discretize_gaussian(grid, 0.0, 2.0);
  double worst = 0.0;
  for (double eps : {0.0, 0.5}) {
    const auto sol = solve_backward_fp(field, v_T, sched, eps);
    for (double p : {2.0, 4.0}) {
      const double base = lp_norm(v_T, p);
      for (const auto& snap : sol.snapshots) {
        const double bound = std::pow(1.0 / snap.time, (1.0 + eps) * (p - 1.0) / (2.0 * p)) * base;
        worst = std::max(worst, lp_norm(snap, p) / bound);
      }
    }
  }
  const auto u_T = discretize_heat_solution(grid, mu, 1.0);
  const auto heat = solve_backward_fp(field, u_T, sched, 0.0);
  const double base = lp_norm(u_T, 2.0);
  double sharp = std::numeric_limits<double>::infinity();
  for (const auto& snap : heat.snapshots) {
    if (snap.time > 0.1 * (1.0 + 1e-12)) continue;
    sharp = std::min(sharp, lp_norm(snap, 2.0) / (0.5 * std::pow(1.0 / snap.time, 0.25) * base));
  }
  const bool pass = worst <= 1.05 && sharp >= 1.0;
  return {pass, fmt("worst norm/bound %.4f (<= 1.05); sharpness min ||v||_2 / (0.5 (T/t)^{1/4} ||v_T||_2) = %.3f (>= 1)",
                    worst, sharp)};
}

Outcome kl_contraction() {
  const auto mu = figure1_measure();
  const Grid grid = truncated_grid(5.0, 1.0, 2048);
  const auto v_T = discretize_gaussian(grid, 0.0, 2.0);
  const auto sched = make_schedule(1.0, 0.01, 20);
  const auto noisy = kl_identity_residual(mu, v_T, sched, 0.5);
  const auto flat = kl_identity_residual(mu, v_T, sched, 0.0);
  const bool pass = noisy.worst_monotonicity_violation <= 1e-3 &&
                    noisy.worst_relative_residual <= 0.02 && flat.max_relative_drift <= 0.02;
  return {pass, fmt("2048 cells: monotonicity violation %.3g (<= 1e-3), identity residual %.3g of total "
                    "change (<= 0.02), eps=0 drift %.3g (<= 0.02)",
                    noisy.worst_monotonicity_violation, noisy.worst_relative_residual,
                    flat.max_relative_drift)};
}

Outcome hull_rate() {
  std::mt19937_64 rng(606);
  const auto fig1 = figure1_measure();
  const auto two = two_dirac_measure();
  const auto sched = make_schedule(1.0, 1e-4, 200);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t failures = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& mu = i % 2 == 0 ? fig1 : two;
    const Vector xT = uniform_vector(rng, mu.dim(), -8.0, 8.0);
    const auto rep = hull_rate_check(integrate_ode(ScoreField::empirical(mu), xT, sched),
                                     support_geometry(mu));
    worst = std::max(worst, rep.worst_violation - rep.slack);
    if (!rep.holds) ++failures;
  }
  return {failures == 0, fmt("100 paths, %.0f violations, worst excess over slack %.3g (<= 0)",
                             static_cast<double>(failures), worst)};
}

Outcome imitation_rate() {
  std::mt19937_64 rng(707);
  const auto fig1 = figure1_measure();
  const auto two = two_dirac_measure();
  const auto sched = make_schedule(1.0, 1e-6, 600);
  double alpha_lo = 1e300;
  double alpha_hi = -1e300;
  double worst_limit = 0.0;
  int generic = 0;
  while (generic < 100) {
    const auto& mu = generic % 2 == 0 ? fig1 : two;
    const Vector xT = uniform_vector(rng, mu.dim(), -8.0, 8.0);
    if (on_bisector(mu, xT, 1e-9)) continue;
    ++generic;
    const auto traj = integrate_ode(ScoreField::empirical(mu), xT, sched);
    const std::size_t i = nearest_atom(mu, traj.terminal());
    const auto fit = fit_rate(traj, mu.point(i));
    alpha_lo = std::min(alpha_lo, fit.alpha);
    alpha_hi = std::max(alpha_hi, fit.alpha);
    worst_limit = std::max(worst_limit, (traj.terminal() - mu.point(i)).norm() /
                                            (10.0 * fit.C * std::sqrt(sched.t_min)));
  }
  const Vector y = vec({0.5, -1.0, 2.0});
  const Vector xT = vec({3.0, 1.0, -1.0});
  const double T = 2.0;
  const auto single = fit_rate(
      integrate_ode(ScoreField::empirical(EmpiricalMeasure({y})), xT, make_schedule(T, 1e-6, 600)), y);
  const double c_exact = (xT - y).norm() / std::sqrt(T);
  const bool pass = alpha_lo >= 0.4 && alpha_hi <= 0.6 && worst_limit <= 1.0 &&
                    std::abs(single.alpha - 0.5) <= 1e-3 && std::abs(single.C - c_exact) <= 1e-3;
  std::ostringstream out;
  out << fmt("alpha in [%.4f, %.4f] (within [0.4, 0.6]); worst |X - y_i| / (10 C sqrt(t_min)) %.3g (<= 1); ",
             alpha_lo, alpha_hi, worst_limit)
      << fmt("single Dirac alpha %.6f, C error %.2g", single.alpha, std::abs(single.C - c_exact));
  return {pass, out.str()};
}

Outcome claims_one_two() {
  std::mt19937_64 rng(808);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t probes = 0;
  while (probes < 10000) {
    const int d = 1 + static_cast<int>(probes % 3);
    const auto mu = random_measure(rng, d, 5, 2.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const auto core = voronoi_core(mu, i);
      for (int tries = 0; tries < 50; ++tries) {
        const Vector x = mu.point(i) + uniform_vector(rng, d, -1.0, 1.0);
        if (!in_core(core, mu, x)) continue;
        const double t = log_uniform(rng, 1e-4, 2.0);
        const double dist = (mean_shift(mu, x, t).m - mu.point(i)).norm();
        worst = std::max(worst, dist - mean_shift_core_bound(core, t));
        ++probes;
      }
    }
  }

  const auto fig1 = figure1_measure();
  const auto two = two_dirac_measure();
  const auto sched = make_schedule(1.0, 1e-6, 600);
  int invariant = 0;
  int checked = 0;
  std::size_t exits = 0;
  while (checked < 100) {
    const auto& mu = checked % 2 == 0 ? fig1 : two;
    const Vector xT = uniform_vector(rng, mu.dim(), -8.0, 8.0);
    if (on_bisector(mu, xT, 1e-9)) continue;
    ++checked;
    const auto rep = claim2_invariance_check(integrate_ode(ScoreField::empirical(mu), xT, sched), mu);
    exits += rep.exits_after_entry;
    if (rep.invariant) ++invariant;
  }

  double gamma_err = 0.0;
  for (double gamma : {0.1, 1.0, 2.0, 12.5, 100.0}) {
    gamma_err = std::max(gamma_err, std::abs(gamma_integral_quadrature(gamma) - 2.0 * std::sqrt(M_PI / gamma)));
  }
  const bool pass = worst <= 1e-12 && invariant == 100 && gamma_err <= 1e-8;
  std::ostringstream out;
  out << fmt("%.0f core probes, worst |m - y_i| - bound %.3g (<= 1e-12); ", static_cast<double>(probes), worst)
      << fmt("%.0f/100 paths invariant (%.0f re-exits); gamma integral error %.3g (<= 1e-8)",
             static_cast<double>(invariant), static_cast<double>(exits), gamma_err);
  return {pass, out.str()};
}

Outcome separatrix() {
  const auto field = ScoreField::empirical(two_dirac_measure());
  const auto sched = make_schedule(1.0, 1e-8, 800);
  const double d0 = integrate_ode(field, vec({0.0, 2.0}), sched).terminal().norm();
  const double d1 = (integrate_ode(field, vec({0.5, 2.0}), sched).terminal() - vec({1.0, 0.0})).norm();
  const double d2 = (integrate_ode(field, vec({-0.5, 2.0}), sched).terminal() - vec({-1.0, 0.0})).norm();
  const bool pass = d0 <= 1e-3 && d1 <= 1e-2 && d2 <= 1e-2;
  return {pass, fmt("|X - (0,0)| = %.3g (<= 1e-3), |X - (1,0)| = %.3g, |X - (-1,0)| = %.3g (<= 1e-2)", d0,
                    d1, d2)};
}

Outcome lemniscate_concentration() {
  const auto mu = lemniscate_dataset(2000, 1.0, 7);
  const auto sched = make_schedule(1.0, 1e-3, 300);
  EnsembleOptions opts;
  opts.keep_paths = false;
  opts.snapshot_times = {0.1, 0.01};
  const auto ens = run_ensemble(ScoreField::empirical(mu), GaussianInit{Vector::Zero(2), std::sqrt(2.0)},
                                sched, 0.2, 10000, 2024, opts);
  const double m1 = neighborhood_mass(ens.snapshots[0], mu, 0.1);
  const double m2 = neighborhood_mass(ens.snapshots[1], mu, 0.1);
  const double m3 = neighborhood_mass(ens.terminal_states, mu, 0.1);
  const bool pass = m1 <= m2 && m2 <= m3 && m3 >= 0.95;
  return {pass, fmt("mass at delta=0.1: t_min=0.1: %.4f, 0.01: %.4f, 0.001: %.4f (monotone, final >= 0.95)",
                    m1, m2, m3)};
}

Outcome loss_identities() {
  const auto mu = two_dirac_measure();
  const auto sample = sample_pairs(mu, 1.0, 100000, 1111);
  const auto base = ScoreField::empirical(mu);
  bool ddpm_equal = true;
  bool penalized_equal = true;
  double best = std::numeric_limits<double>::infinity();
  double best_scale = 0.0;
  std::vector<double> gap;
  std::vector<double> gap_se;
  const double span = sample.T - sample.t_floor;
  for (double c : {0.8, 0.9, 1.0, 1.1}) {
    const auto cand = make_candidate(base, ScaleBy{c});
    const double sm = score_matching_loss(cand, mu, sample).value;
    ddpm_equal = ddpm_equal && sm == ddpm_loss(cand, mu, sample).value;
    penalized_equal = penalized_equal && sm == penalized_loss(cand, mu, 0.0, sample).value;
    if (sm < best) {
      best = sm;
      best_scale = c;
    }
    const auto a = loss_integrands(cand, mu, sample, Objective::ScoreMatching);
    const auto b = loss_integrands(cand, mu, sample, Objective::Hyvarinen);
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    gap.push_back(span * mean);
    gap_se.push_back(span * std::sqrt(ss / (n - 1.0) / n));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < gap.size(); ++i) {
    for (std::size_t j = i + 1; j < gap.size(); ++j) {
      worst = std::max(worst, std::abs(gap[i] - gap[j]) /
                                  (3.0 * std::sqrt(gap_se[i] * gap_se[i] + gap_se[j] * gap_se[j])));
    }
  }
  const bool pass = ddpm_equal && penalized_equal && worst <= 1.0 && best_scale == 1.0;
  std::ostringstream out;
  out << "SM == DDPM bitwise: " << (ddpm_equal ? "yes" : "no")
      << "; penalized(lambda=0) == SM bitwise: " << (penalized_equal ? "yes" : "no")
      << fmt("; worst Hyvarinen shift %.3f pooled 3-sigma units (<= 1); argmin scale %.1f", worst,
             best_scale);
  return {pass, out.str()};
}

Outcome ou_round_trip() {
  std::mt19937_64 rng(1212);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector x = uniform_vector(rng, 1 + i % 3, -10.0, 10.0);
    const double tau = log_uniform(rng, 1e-6, 5.0);
    const auto heat = ou_to_heat(x, tau);
    const auto back = heat_to_ou(heat.x, heat.t);
    worst = std::max(worst, std::abs(back.tau - tau) / std::max(1.0, tau));
    worst = std::max(worst, (back.x - x).norm() / std::max(1.0, x.norm()));
  }
  const auto spot = heat_to_ou(vec({1.0}), 1.0);
  const double spot_err = std::max(std::abs(spot.tau - 0.5 * std::log(3.0)),
                                   std::abs(1.0 / spot.x(0) - std::sqrt(3.0)));
  const bool pass = worst <= 1e-12 && spot_err <= 1e-12;
  return {pass, fmt("1000 round trips, worst relative error %.3g (<= 1e-12); t=1 spot error %.3g", worst,
                    spot_err)};
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "Li-Yau inequality", 5.0, li_yau},
      {2, "score consistency", 5.0, score_consistency},
      {3, "Hessian bounds", 10.0, hessian_bounds},
      {4, "energy estimate", 120.0, energy_estimate},
      {5, "KL contraction", 120.0, kl_contraction},
      {6, "convex-hull rate", 30.0, hull_rate},
      {7, "imitation rate", 60.0, imitation_rate},
      {8, "Voronoi core claims", 30.0, claims_one_two},
      {9, "separatrix", 5.0, separatrix},
      {10, "lemniscate concentration", 180.0, lemniscate_concentration},
      {11, "loss identities", 60.0, loss_identities},
      {12, "OU transform", 1.0, ou_round_trip},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = outcome.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s [%2d] %s: %s; %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.number, c.name,
                outcome.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
