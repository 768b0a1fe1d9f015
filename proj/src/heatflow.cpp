#include "scoreflow/heatflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace scoreflow {
namespace {

double log_heat_prefactor(int dim, double t) {
  return -0.5 * dim * std::log(4.0 * M_PI * t);
}

}  // namespace

double posterior_responsibilities(const EmpiricalMeasure& mu, const Vector& x, double t,
                                  Eigen::ArrayXd& resp) {
  require_positive_time(t, "gaussian_posterior");
  const int d = mu.dim();
  if (x.size() != d) throw std::invalid_argument("gaussian_posterior: dimension mismatch");

  const Matrix& coords = mu.coordinates();
  resp = (coords.col(0).array() - x(0)).square();
  for (int i = 1; i < d; ++i) resp += (coords.col(i).array() - x(i)).square();
  resp = mu.log_weights().array() - resp * (1.0 / (4.0 * t));
  const double top = resp.maxCoeff();
  resp = (resp - top).exp();
  const double total = resp.sum();
  resp /= total;
  return top + std::log(total);
}

GaussianPosterior gaussian_posterior(const EmpiricalMeasure& mu, const Vector& x, double t) {
  Eigen::ArrayXd resp;
  GaussianPosterior post;
  post.log_partition = posterior_responsibilities(mu, x, t, resp);
  post.mean = mu.points() * resp.matrix();
  post.responsibilities = std::move(resp).matrix();
  return post;
}

Matrix posterior_covariance(const EmpiricalMeasure& mu, const GaussianPosterior& post) {
  const int d = mu.dim();
  Matrix cov = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < post.responsibilities.size(); ++k) {
    const double r = post.responsibilities(k);
    if (r == 0.0) continue;
    const Vector dev = mu.points().col(k) - post.mean;
    cov.noalias() += r * dev * dev.transpose();
  }
  return cov;
}

double log_density(const EmpiricalMeasure& mu, const Vector& x, double t) {
  require_positive_time(t, "log_density");
  return gaussian_posterior(mu, x, t).log_partition + log_heat_prefactor(mu.dim(), t);
}

LogDensityJet log_density_jet(const EmpiricalMeasure& mu, const Vector& x, double t) {
  require_positive_time(t, "log_density_jet");
  const auto post = gaussian_posterior(mu, x, t);
  const int d = mu.dim();
  LogDensityJet jet;
  jet.value = post.log_partition + log_heat_prefactor(d, t);
  jet.gradient = (post.mean - x) / (2.0 * t);
  jet.hessian = posterior_covariance(mu, post) / (4.0 * t * t);
  jet.hessian.diagonal().array() -= 1.0 / (2.0 * t);
  return jet;
}

DensityBounds gaussian_bounds(double radius, int dim, const Vector& x, double t) {
  require_positive_time(t, "gaussian_bounds");
  const double r = x.norm();
  const double pref = log_heat_prefactor(dim, t);
  DensityBounds b;
  b.log_lower = pref - (r + radius) * (r + radius) / (4.0 * t);
  const double gap = std::max(r - radius, 0.0);
  b.log_upper = pref - gap * gap / (4.0 * t);
  b.lower = std::exp(b.log_lower);
  b.upper = std::exp(b.log_upper);
  return b;
}

DensityBounds gaussian_bounds(const EmpiricalMeasure& mu, const Vector& x, double t) {
  return gaussian_bounds(mu.points().colwise().norm().maxCoeff(), mu.dim(), x, t);
}

double folded_gaussian_exp_moment(double sigma) {
  const double phi = 0.5 * std::erfc(-sigma / std::sqrt(2.0));
  return 2.0 * std::exp(0.5 * sigma * sigma) * phi;
}

MomentEstimate exp_moment_estimate(const EmpiricalMeasure& mu, double t, std::size_t n_samples,
                                   Seed seed) {
  require_positive_time(t, "exp_moment_estimate");
  if (n_samples == 0) throw std::invalid_argument("exp_moment_estimate: n_samples must be >= 1");

  const Vector& w = mu.weights();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(w.data(), w.data() + w.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(2.0 * t);
  const int d = mu.dim();

  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  Vector x(d);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto k = static_cast<Eigen::Index>(pick(rng));
    for (int j = 0; j < d; ++j) x(j) = mu.points()(j, k) + sd * normal(rng);
    const double v = std::exp(x.norm());
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }

  MomentEstimate est;
  est.value = mean;
  est.n_samples = n_samples;
  est.std_error = n_samples > 1 ? std::sqrt(m2 / static_cast<double>(n_samples - 1) /
                                            static_cast<double>(n_samples))
                                : 0.0;
  const double radius = mu.points().colwise().norm().maxCoeff();
  est.bound = std::exp(radius) * std::pow(folded_gaussian_exp_moment(sd), d);
  return est;
}

}  // namespace scoreflow
