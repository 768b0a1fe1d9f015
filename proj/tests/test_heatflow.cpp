#include "doctest.h"
#include "test_support.hpp"

#include "scoreflow/heatflow.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <Eigen/Eigenvalues>

#include <cmath>

using namespace scoreflow;
using scoreflow::testing::vec;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

Big direct_density(const EmpiricalMeasure& mu, const Vector& x, double t) {
  const Big four_pi_t = 4 * boost::math::constants::pi<Big>() * Big(t);
  Big total = 0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    Big r2 = 0;
    for (int i = 0; i < mu.dim(); ++i) {
      const Big diff = Big(x(i)) - Big(mu.points()(i, static_cast<Eigen::Index>(k)));
      r2 += diff * diff;
    }
    total += Big(mu.weights()(static_cast<Eigen::Index>(k))) * exp(-r2 / (4 * Big(t)));
  }
  return total * pow(four_pi_t, Big(-0.5 * mu.dim()));
}

Vector fd_gradient(const EmpiricalMeasure& mu, const Vector& x, double t, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (log_density(mu, xp, t) - log_density(mu, xm, t)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE("heatflow") {
  TEST_CASE("unit density at the centre of a single Dirac") {
    const auto mu = scoreflow::testing::single_dirac(vec({0.0}));
    CHECK(std::abs(log_density(mu, vec({0.0}), 1.0 / (4.0 * M_PI))) <= 1e-15);
  }

  TEST_CASE("two-Dirac log density is even across the bisector") {
    const auto mu = scoreflow::testing::two_dirac_measure();
    for (double y : {0.1, 0.7, 2.5}) {
      CHECK(log_density(mu, vec({0.0, y}), 0.3) == doctest::Approx(log_density(mu, vec({0.0, -y}), 0.3)).epsilon(1e-14));
    }
  }

  TEST_CASE("log density matches extended-precision summation") {
    const auto mu = scoreflow::testing::figure1_measure();
    const Vector x = vec({-5.0});
    const double got = log_density(mu, x, 0.01);
    const double expected = static_cast<double>(log(direct_density(mu, x, 0.01)));
    CHECK(std::abs(got - expected) <= 1e-12 * std::abs(expected));

    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 200; ++rep) {
      const auto m = scoreflow::testing::random_measure(rng, 1 + rep % 3, 5, 3.0);
      const Vector p = scoreflow::testing::random_vector(rng, m.dim(), -4.0, 4.0);
      const double t = scoreflow::testing::random_time(rng, 1e-3, 2.0);
      const double ref = static_cast<double>(log(direct_density(m, p, t)));
      CHECK(std::abs(log_density(m, p, t) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }

  TEST_CASE("log density stays finite at tiny times") {
    const auto mu = scoreflow::testing::figure1_measure();
    const double v = log_density(mu, vec({2.0}), 1e-12);
    CHECK(std::isfinite(v));
    const double expected = static_cast<double>(log(direct_density(mu, vec({2.0}), 1e-12)));
    CHECK(std::abs(v - expected) <= 1e-12 * std::abs(expected));
  }

  TEST_CASE("non-positive time is rejected") {
    const auto mu = scoreflow::testing::figure1_measure();
    CHECK_THROWS_AS(log_density(mu, vec({0.0}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(log_density_jet(mu, vec({0.0}), -1.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_bounds(mu, vec({0.0}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_moment_estimate(mu, 0.0, 10, 1), std::invalid_argument);
  }

  TEST_CASE("single Dirac Hessian is -I/(2t)") {
    const auto mu = scoreflow::testing::single_dirac(vec({1.0, -2.0}));
    const auto jet = log_density_jet(mu, vec({0.3, 0.4}), 0.7);
    const Matrix expected = -Matrix::Identity(2, 2) / 1.4;
    CHECK((jet.hessian - expected).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("jet agrees with finite differences of the log density") {
    std::mt19937_64 rng(5);
    int checked = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      const int d = 1 + rep % 3;
      const auto mu = scoreflow::testing::random_measure(rng, d, 4, 2.0);
      const Vector x = scoreflow::testing::random_vector(rng, d, -3.0, 3.0);
      const double t = scoreflow::testing::random_time(rng, 0.05, 2.0);
      const auto jet = log_density_jet(mu, x, t);

      const Vector g = fd_gradient(mu, x, t, 1e-5);
      const double scale = std::max(jet.gradient.norm(), 1.0);
      CHECK((g - jet.gradient).norm() <= 1e-6 * scale);

      CHECK((jet.hessian - jet.hessian.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      const double h = 1e-3;
      Matrix hess(d, d);
      for (int i = 0; i < d; ++i) {
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        hess.col(i) = (log_density_jet(mu, xp, t).gradient - log_density_jet(mu, xm, t).gradient) / (2.0 * h);
      }
      const double hscale = std::max(jet.hessian.norm(), 1.0);
      CHECK((hess - jet.hessian).norm() <= 1e-4 * hscale);
      ++checked;
    }
    CHECK(checked == 1000);
  }

  TEST_CASE("Hessian eigenvalues obey the spectral bounds") {
    const auto fig1 = scoreflow::testing::figure1_measure();
    const auto jet = log_density_jet(fig1, vec({1.0}), 0.5);
    CHECK(jet.hessian(0, 0) >= -1.0);
    CHECK(jet.hessian(0, 0) <= -1.0 + 25.0);

    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 1000; ++rep) {
      const int d = 1 + rep % 3;
      const auto mu = scoreflow::testing::random_measure(rng, d, 6, 2.0);
      const double R = mu.points().colwise().norm().maxCoeff();
      const Vector x = scoreflow::testing::random_vector(rng, d, -4.0, 4.0);
      const double t = scoreflow::testing::random_time(rng, 1e-3, 2.0);
      const Matrix hess = log_density_jet(mu, x, t).hessian;
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(hess);
      CHECK(eig.eigenvalues().minCoeff() >= -1.0 / (2.0 * t) - 1e-9 / t);
      CHECK(eig.eigenvalues().maxCoeff() <= -1.0 / (2.0 * t) + R * R / (4.0 * t * t) + 1e-9 / (t * t));
    }
  }

  TEST_CASE("Gaussian bounds") {
    const auto dirac = scoreflow::testing::single_dirac(vec({0.0}));
    for (double x : {0.0, 0.5, 3.0}) {
      const auto b = gaussian_bounds(dirac, vec({x}), 0.4);
      const double u = std::exp(log_density(dirac, vec({x}), 0.4));
      CHECK(b.lower == doctest::Approx(u).epsilon(1e-14));
      CHECK(b.upper == doctest::Approx(u).epsilon(1e-14));
    }

    const auto fig1 = scoreflow::testing::figure1_measure();
    const auto far = gaussian_bounds(fig1, vec({10.0}), 1.0);
    const double u = std::exp(log_density(fig1, vec({10.0}), 1.0));
    CHECK(far.lower <= u);
    CHECK(u <= far.upper);
    // Outside the ball the envelope is (4 pi t)^{-1/2} exp(-(|x| -/+ R)^2 / (4t)).
    CHECK(far.log_upper == doctest::Approx(-0.5 * std::log(4.0 * M_PI) - 25.0 / 4.0));
    CHECK(far.log_lower == doctest::Approx(-0.5 * std::log(4.0 * M_PI) - 225.0 / 4.0));

    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 1000; ++rep) {
      const int d = 1 + rep % 3;
      const auto mu = scoreflow::testing::random_measure(rng, d, 5, 2.0);
      const Vector x = scoreflow::testing::random_vector(rng, d, -5.0, 5.0);
      const double t = scoreflow::testing::random_time(rng, 1e-2, 3.0);
      const auto bounds = gaussian_bounds(mu, x, t);
      const double lu = log_density(mu, x, t);
      CHECK(lu >= bounds.log_lower - 1e-12 * std::abs(lu));
      CHECK(lu <= bounds.log_upper + 1e-12 * std::abs(lu));
    }
  }

  TEST_CASE("exponential moment of a centred Dirac") {
    const auto dirac = scoreflow::testing::single_dirac(vec({0.0}));
    const auto tiny = exp_moment_estimate(dirac, 1e-8, 2000, 3);
    CHECK(tiny.value == doctest::Approx(1.0).epsilon(1e-3));

    // Quadrature oracle for E e^{|Z|}, Z ~ N(0, 2t).
    const double t = 0.5;
    const double sigma = std::sqrt(2.0 * t);
    const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double z) {
          return std::exp(std::abs(z)) * std::exp(-z * z / (2.0 * sigma * sigma)) /
                 (sigma * std::sqrt(2.0 * M_PI));
        },
        -40.0, 40.0, 15, 1e-13);
    CHECK(folded_gaussian_exp_moment(sigma) == doctest::Approx(quad).epsilon(1e-10));

    const auto est = exp_moment_estimate(dirac, t, 40000, 9);
    CHECK(std::abs(est.value - quad) <= 4.0 * est.std_error);
    CHECK(est.bound == doctest::Approx(quad).epsilon(1e-12));

    const auto again = exp_moment_estimate(dirac, t, 40000, 9);
    CHECK(again.value == est.value);
  }

  TEST_CASE("exponential moment stays under the envelope") {
    const auto fig1 = scoreflow::testing::figure1_measure();
    for (double t : {0.01, 0.1, 1.0}) {
      const auto est = exp_moment_estimate(fig1, t, 20000, 13);
      const double single = folded_gaussian_exp_moment(std::sqrt(2.0 * t));
      CHECK(est.value <= std::exp(5.0) * single + 3.0 * est.std_error);
      CHECK(est.bound == doctest::Approx(std::exp(5.0) * single));
    }
  }
}
