#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "isac/stats.hpp"

using namespace isac;

// Reference quantiles computed once with an independent statistics package
// and frozen here. Relative agreement at 1e-9 exercises both the incomplete
// gamma series and the continued fraction across small and large dof.
TEST_CASE("chi-square quantiles match frozen references") {
  struct Row {
    int dof;
    double p, want;
  };
  const Row rows[] = {
      {2, 0.95, 5.99146454710798},
      {4, 0.95, 9.48772903678115},
      {8, 0.95, 15.5073130558655},
      {12, 0.95, 21.0260698174831},
      {16, 0.95, 26.2962276048642},
      {24, 0.95, 36.4150285018073},
      {288, 0.95, 328.58040133624},
      {1, 0.5, 0.454936423119572},
      {3, 0.9, 6.25138863117033},
      {12, 0.5, 11.3403223774241},
  };
  for (const auto& r : rows) {
    CHECK(chi2_quantile(r.dof, r.p) ==
          doctest::Approx(r.want).epsilon(1e-9));
  }
}

TEST_CASE("chi-square quantile and cdf are mutually inverse") {
  for (int dof : {1, 2, 3, 7, 12, 50, 144, 288}) {
    for (double p : {0.01, 0.05, 0.25, 0.5, 0.9, 0.95, 0.999}) {
      const double x = chi2_quantile(dof, p);
      CHECK(chi2_cdf(dof, x) == doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("two degrees of freedom reduce to the exponential") {
  for (double x : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    CHECK(chi2_cdf(2, x) == doctest::Approx(1.0 - std::exp(-x / 2.0)).epsilon(1e-13));
  }
}

TEST_CASE("regularized gamma halves sum to one") {
  for (double a : {0.5, 1.0, 7.3, 100.0, 1000.0}) {
    for (double x : {0.01, 0.7, 5.0, 90.0, 1100.0}) {
      CHECK(gamma_p(a, x) + gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gamma cdf with unit shape is exponential") {
  for (double x : {0.2, 1.0, 4.0}) {
    CHECK(gamma_cdf_shape_scale(1.0, 2.0, x) ==
          doctest::Approx(1.0 - std::exp(-x / 2.0)).epsilon(1e-13));
  }
}

TEST_CASE("divergence rate basics") {
  CHECK(kl_rate(0.0) == 0.0);
  // x - ln(1+x) ~ x^2/2 - x^3/3 for small x
  const double x = 1e-4;
  CHECK(kl_rate(x) == doctest::Approx(x * x / 2 - x * x * x / 3).epsilon(1e-6));
  double prev = -1.0;
  for (double t : {0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0}) {
    const double v = kl_rate(t);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("divergence rate inverse hits frozen references") {
  CHECK(kl_rate_inverse(0.0) == 0.0);
  struct Row {
    double target, want;
  };
  // targets are 2*eps^2/N for the setups exercised elsewhere
  const Row rows[] = {
      {2 * 0.1 * 0.1 / 1000, 0.00633789567503016},
      {2 * 0.2 * 0.2 / 500, 0.01799536911711},
      {2 * 0.05 * 0.05 / 100, 0.0100333610740973},
      {2 * 0.1 * 0.1 / 100, 0.0201335549637074},
  };
  for (const auto& r : rows) {
    const double x = kl_rate_inverse(r.target);
    CHECK(x == doctest::Approx(r.want).epsilon(1e-9));
    // defining equation residual; the difference x - ln(1+x) cancels to
    // roughly eps*x absolute, so only ~1e-10 relative is meaningful here
    CHECK(std::abs(kl_rate(x) - r.target) <= 1e-9 * r.target + 1e-18);
  }
}

TEST_CASE("radiometer error sum: frozen references") {
  // on the covertness boundary for N=1000, eps=0.1
  CHECK(radiometer_min_error_sum(1000, 1.0, 1.0 + 0.00633789567503016) ==
        doctest::Approx(0.9204345533794716).epsilon(1e-9));
  CHECK(radiometer_threshold(1000, 1.0, 1.0 + 0.00633789567503016) ==
        doctest::Approx(1003.1622741524477).epsilon(1e-9));
  CHECK(radiometer_min_error_sum(1000, 1.0, 1.2) ==
        doctest::Approx(0.0039534566035047645).epsilon(1e-9));
  CHECK(radiometer_min_error_sum(100, 1.0, 1.05) ==
        doctest::Approx(0.8074294129178441).epsilon(1e-9));
}

TEST_CASE("radiometer degenerate direction") {
  CHECK(radiometer_min_error_sum(1000, 1.0, 1.0) == 1.0);
  CHECK(radiometer_min_error_sum(1000, 1.0, 0.9) == 1.0);
}

TEST_CASE("radiometer boundary respects the total-variation floor") {
  // divergence 2*eps^2 allows detection no better than 1 - eps
  const double xi = radiometer_min_error_sum(1000, 1.0, 1.0 + 0.00633789567503016);
  CHECK(xi >= 1.0 - 0.1);
}

TEST_CASE("radiometer error sum agrees with simulation") {
  const int n = 20;
  const double var0 = 1.0, var1 = 1.5;
  const double thr = radiometer_threshold(n, var0, var1);
  std::mt19937_64 g(99);
  std::exponential_distribution<double> e0(1.0 / var0), e1(1.0 / var1);
  const int trials = 200000;
  int fa = 0, md = 0;
  for (int t = 0; t < trials; ++t) {
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < n; ++i) {
      s0 += e0(g);
      s1 += e1(g);
    }
    if (s0 > thr) ++fa;
    if (s1 <= thr) ++md;
  }
  const double empirical = double(fa) / trials + double(md) / trials;
  const double want = radiometer_min_error_sum(n, var0, var1);
  // binomial noise on two proportions; 4 sigma with p(1-p) <= 1/4 each
  const double wiggle = 4.0 * std::sqrt(2.0 * 0.25 / trials);
  CHECK(std::abs(empirical - want) <= wiggle);
}
