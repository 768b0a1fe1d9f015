#pragma once

#include "scoreflow/measures.hpp"

#include <random>
#include <vector>

namespace scoreflow::testing {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// 0.7 delta_{-5} + 0.3 delta_0 + 0.1 delta_5, renormalized.
inline EmpiricalMeasure figure1_measure() {
  return EmpiricalMeasure({vec({-5.0}), vec({0.0}), vec({5.0})}, {0.7, 0.3, 0.1});
}

/// (delta_{(-1,0)} + delta_{(1,0)}) / 2.
inline EmpiricalMeasure two_dirac_measure() {
  return EmpiricalMeasure({vec({-1.0, 0.0}), vec({1.0, 0.0})}, {0.5, 0.5});
}

inline EmpiricalMeasure single_dirac(const Vector& y) { return EmpiricalMeasure({y}); }

inline Vector random_vector(std::mt19937_64& rng, int d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = u(rng);
  return v;
}

/// log-uniform time in [lo, hi].
inline double random_time(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

inline EmpiricalMeasure random_measure(std::mt19937_64& rng, int d, int n, double spread) {
  std::vector<Vector> pts;
  std::vector<double> w;
  std::uniform_real_distribution<double> uw(0.1, 1.0);
  for (int k = 0; k < n; ++k) {
    pts.push_back(random_vector(rng, d, -spread, spread));
    w.push_back(uw(rng));
  }
  return EmpiricalMeasure(pts, w);
}

}  // namespace scoreflow::testing
