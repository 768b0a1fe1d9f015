#include "doctest.h"
#include "test_support.hpp"

#include "scoreflow/diagnostics.hpp"
#include "scoreflow/score.hpp"

#include <cmath>

using namespace scoreflow;
using scoreflow::testing::vec;

TEST_SUITE("score") {
  TEST_CASE("closed-form scores") {
    const auto dirac = scoreflow::testing::single_dirac(vec({0.0}));
    CHECK(empirical_score(dirac, vec({2.0}), 0.5)(0) == doctest::Approx(-2.0));

    const auto two = scoreflow::testing::two_dirac_measure();
    const Vector s = empirical_score(two, vec({0.0, 1.0}), 0.25);
    CHECK(std::abs(s(0)) <= 1e-15);
    CHECK(s(1) == doctest::Approx(-2.0).epsilon(1e-14));
  }

  TEST_CASE("score matches the jet gradient and finite differences") {
    const auto fig1 = scoreflow::testing::figure1_measure();
    const Vector x = vec({-5.0});
    const double t = 0.01;
    const double h = 1e-5;
    const double fd = (log_density(fig1, vec({-5.0 + h}), t) - log_density(fig1, vec({-5.0 - h}), t)) / (2 * h);
    const double s = empirical_score(fig1, x, t)(0);
    CHECK(std::abs(s - fd) <= 1e-6 * std::max(1.0, std::abs(s)));

    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 1000; ++rep) {
      const int d = 1 + rep % 3;
      const auto mu = scoreflow::testing::random_measure(rng, d, 4, 2.0);
      const Vector p = scoreflow::testing::random_vector(rng, d, -3.0, 3.0);
      const double tt = scoreflow::testing::random_time(rng, 1e-4, 1.0);
      const Vector score = empirical_score(mu, p, tt);
      const Vector grad = log_density_jet(mu, p, tt).gradient;
      CHECK((score - grad).norm() <= 1e-12 * std::max(1.0, grad.norm()));

      // Step scaled with sqrt(t) keeps the stencil inside the resolved Gaussian width.
      const double step = 1e-5 * std::min(1.0, std::sqrt(tt) * 10.0);
      Vector fdg(d);
      for (int i = 0; i < d; ++i) {
        Vector xp = p, xm = p;
        xp(i) += step;
        xm(i) -= step;
        fdg(i) = (log_density(mu, xp, tt) - log_density(mu, xm, tt)) / (2 * step);
      }
      CHECK((fdg - score).norm() <= 1e-6 * std::max(1.0, score.norm()));
    }
  }

  TEST_CASE("mean shift examples") {
    const auto dirac = scoreflow::testing::single_dirac(vec({1.5, -0.5}));
    for (double t : {1e-3, 0.2, 5.0}) {
      const auto ms = mean_shift(dirac, vec({4.0, 4.0}), t);
      CHECK((ms.m - vec({1.5, -0.5})).norm() == 0.0);
    }
    const auto two = scoreflow::testing::two_dirac_measure();
    const auto mid = mean_shift(two, vec({0.0, 3.0}), 0.1);
    CHECK(mid.m.norm() <= 1e-15);
    CHECK(mid.responsibilities(0) == doctest::Approx(0.5));
  }

  TEST_CASE("mean shift is a convex combination") {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 1000; ++rep) {
      const int d = 1 + rep % 2;
      const auto mu = scoreflow::testing::random_measure(rng, d, 7, 3.0);
      const auto geom = support_geometry(mu);
      const Vector x = scoreflow::testing::random_vector(rng, d, -6.0, 6.0);
      const double t = scoreflow::testing::random_time(rng, 1e-4, 3.0);
      const auto ms = mean_shift(mu, x, t);
      CHECK((ms.responsibilities.array() >= 0.0).all());
      CHECK(std::abs(ms.responsibilities.sum() - 1.0) <= 1e-12);
      CHECK(in_hull(geom, ms.m, 1e-9));
    }
  }

  TEST_CASE("divergence examples") {
    const auto dirac = scoreflow::testing::single_dirac(vec({0.0, 0.0}));
    CHECK(empirical_divergence(dirac, vec({0.3, 1.0}), 0.5) == -2.0);

    const auto fig1 = scoreflow::testing::figure1_measure();
    const auto field = ScoreField::empirical(fig1);
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 500; ++rep) {
      const Vector x = scoreflow::testing::random_vector(rng, 1, -8.0, 8.0);
      const double t = scoreflow::testing::random_time(rng, 1e-3, 2.0);
      CHECK(empirical_divergence(fig1, x, t) + 1.0 / (2.0 * t) >= -1e-9 / t);
      if (t > 0.05) {
        const double fd = finite_difference_divergence(field, x, t);
        const double an = field.divergence(x, t);
        CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
      }
    }
  }

  TEST_CASE("Li-Yau margin") {
    const auto dirac = ScoreField::empirical(scoreflow::testing::single_dirac(vec({0.0, 1.0})));
    CHECK(std::abs(li_yau_margin(dirac, vec({2.0, -1.0}), 0.3)) <= 1e-12);

    // Two Diracs at +-1 in one dimension, x = 0: both responsibilities are 1/2, so the
    // posterior variance is 1 and the margin is 1 / (4 t^2).
    const auto two = ScoreField::empirical(EmpiricalMeasure({vec({-1.0}), vec({1.0})}));
    const double t = 0.05;
    CHECK(li_yau_margin(two, vec({0.0}), t) == doctest::Approx(1.0 / (4.0 * t * t)).epsilon(1e-12));

    const auto doubled = make_candidate(two, ScaleBy{2.0});
    CHECK(li_yau_margin(doubled, vec({3.0}), 0.05) < 0.0);
    CHECK_THROWS_AS(li_yau_margin(two, vec({0.0}), 0.0), std::invalid_argument);

    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 1000; ++rep) {
      const int d = 1 + rep % 3;
      const auto field = ScoreField::empirical(scoreflow::testing::random_measure(rng, d, 5, 2.0));
      const Vector x = scoreflow::testing::random_vector(rng, d, -4.0, 4.0);
      const double tt = scoreflow::testing::random_time(rng, 1e-4, 2.0);
      CHECK(li_yau_margin(field, x, tt) >= -1e-9 * d / tt);
    }
  }

  TEST_CASE("Claim 1 concentration inside the Voronoi core") {
    std::mt19937_64 rng(1234);
    int probes = 0;
    for (int rep = 0; rep < 40; ++rep) {
      const int d = 1 + rep % 2;
      const auto mu = scoreflow::testing::random_measure(rng, d, 4, 2.0);
      for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto core = voronoi_core(mu, i);
        int found = 0;
        for (int tries = 0; tries < 400 && found < 10; ++tries) {
          const Vector x = mu.point(i) + scoreflow::testing::random_vector(rng, d, -2.0, 2.0);
          if (!in_core(core, mu, x)) continue;
          const double t = scoreflow::testing::random_time(rng, 1e-3, 1.0);
          const auto ms = mean_shift(mu, x, t);
          CHECK((ms.m - mu.point(i)).norm() <= mean_shift_core_bound(core, t) + 1e-12);
          ++found;
          ++probes;
        }
      }
    }
    CHECK(probes >= 1000);
  }

  TEST_CASE("candidate fields") {
    const auto base = ScoreField::empirical(scoreflow::testing::two_dirac_measure());
    const auto same = make_candidate(base, ScaleBy{1.0});
    const auto zero = make_candidate(base, ScaleBy{0.0});
    const auto shifted = make_candidate(base, ShiftBy{vec({1.0, 0.0})});
    CHECK(same.kind() == ScoreKind::Scaled);
    CHECK(shifted.kind() == ScoreKind::Biased);
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 200; ++rep) {
      const Vector x = scoreflow::testing::random_vector(rng, 2, -3.0, 3.0);
      const double t = scoreflow::testing::random_time(rng, 1e-2, 1.0);
      CHECK(same.eval(x, t) == base.eval(x, t));
      CHECK(same.divergence(x, t) == base.divergence(x, t));
      CHECK(zero.eval(x, t).norm() == 0.0);
      CHECK(zero.divergence(x, t) == 0.0);
      CHECK(shifted.divergence(x, t) == base.divergence(x, t));
      CHECK((shifted.eval(x, t) - base.eval(x, t) - vec({1.0, 0.0})).norm() <= 1e-12);
    }
  }

  TEST_CASE("custom fields fall back to finite-difference divergence") {
    const auto field = ScoreField::custom(2, [](const Vector& x, double t) -> Vector {
      return Vector(x.array().square() / t);
    });
    const Vector x = vec({0.5, -1.5});
    CHECK(field.divergence(x, 2.0) == doctest::Approx((2 * 0.5 + 2 * -1.5) / 2.0).epsilon(1e-8));
    CHECK(field.kind() == ScoreKind::Custom);
    CHECK_THROWS_AS(field.eval(x, 0.0), std::invalid_argument);
  }
}
