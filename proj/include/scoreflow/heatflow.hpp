#pragma once

#include "scoreflow/measures.hpp"

namespace scoreflow {

/// Gaussian posterior over atoms at (x, t): r_k proportional to w_k exp(-|x - y_k|^2 / (4t)).
///
/// Computed in log space with the largest exponent factored out, so nothing overflows
/// and the dominant atom always carries a representable weight.
struct GaussianPosterior {
  Vector responsibilities;
  Vector mean;                  // m(x, t) = sum_k r_k y_k
  double log_partition = 0.0;   // log sum_k w_k exp(-|x - y_k|^2 / (4t))
};

GaussianPosterior gaussian_posterior(const EmpiricalMeasure& mu, const Vector& x, double t);

/// Writes the normalized responsibilities into `resp` and returns the log partition.
double posterior_responsibilities(const EmpiricalMeasure& mu, const Vector& x, double t,
                                  Eigen::ArrayXd& resp);

/// Posterior covariance sum_k r_k (y_k - m)(y_k - m)^T.
Matrix posterior_covariance(const EmpiricalMeasure& mu, const GaussianPosterior& post);

/// log u(x, t) for u = G_t * u0.
double log_density(const EmpiricalMeasure& mu, const Vector& x, double t);

struct LogDensityJet {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// log u with its gradient (the score) and Hessian -I/(2t) + Cov/(4t^2).
LogDensityJet log_density_jet(const EmpiricalMeasure& mu, const Vector& x, double t);

/// Two-sided Gaussian envelope of u(x, t) for supp(u0) inside B_R(0).
struct DensityBounds {
  double lower = 0.0;
  double upper = 0.0;
  double log_lower = 0.0;
  double log_upper = 0.0;
};

DensityBounds gaussian_bounds(const EmpiricalMeasure& mu, const Vector& x, double t);
DensityBounds gaussian_bounds(double radius, int dim, const Vector& x, double t);

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double bound = 0.0;  // e^R (E e^{|Z|})^d with Z ~ N(0, 2t)
  std::size_t n_samples = 0;
};

/// Monte Carlo estimate of the integral of e^{|x|} u(x, t) dx.
MomentEstimate exp_moment_estimate(const EmpiricalMeasure& mu, double t, std::size_t n_samples,
                                   Seed seed);

/// E e^{|Z|} for Z ~ N(0, sigma^2): 2 exp(sigma^2 / 2) Phi(sigma).
double folded_gaussian_exp_moment(double sigma);

}  // namespace scoreflow
