#include "isac/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace isac {

namespace {

// Series expansion of P(a,x), valid/fast for x < a+1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int it = 0; it < 500; ++it) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a,x), valid/fast for x >= a+1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi2_cdf(int dof, double x) {
  if (dof < 1) throw std::invalid_argument("chi2_cdf: dof must be >= 1");
  return gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(int dof, double p) {
  if (dof < 1) throw std::invalid_argument("chi2_quantile: dof must be >= 1");
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("chi2_quantile: p must lie in [0,1)");
  if (p == 0.0) return 0.0;
  // Bracket: the mean+spread bound dof + 10*sqrt(2*dof) + 50 covers any p we
  // accept; double defensively if not.
  double lo = 0.0;
  double hi = dof + 10.0 * std::sqrt(2.0 * dof) + 50.0;
  while (chi2_cdf(dof, hi) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (chi2_cdf(dof, mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-10 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

double gamma_cdf_shape_scale(double shape, double scale, double x) {
  if (!(scale > 0.0)) throw std::invalid_argument("gamma_cdf: scale must be positive");
  return gamma_p(shape, x / scale);
}

double kl_rate(double x) {
  if (x <= -1.0) return std::numeric_limits<double>::infinity();
  return x - std::log1p(x);
}

double kl_rate_inverse(double target) {
  if (target < 0.0) throw std::invalid_argument("kl_rate_inverse: target must be >= 0");
  if (target == 0.0) return 0.0;
  // f(x) >= x^2/2 - x^3/3 near 0 and grows ~x for large x; this bracket holds
  // for every target >= 0 (checked by the doubling guard below).
  double lo = 0.0;
  double hi = 1.0 + 2.0 * target + 2.0 * std::sqrt(target);
  while (kl_rate(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (kl_rate(mid) < target)
      lo = mid;
    else
      hi = mid;
    if (std::fabs(kl_rate(mid) - target) <= 1e-12 && hi - lo <= 1e-12 * (1.0 + hi))
      break;
  }
  return 0.5 * (lo + hi);
}

double radiometer_threshold(int n_samples, double var0, double var1) {
  // Likelihood ratio of Gamma(n, var) densities crosses 1 at
  // g = n * ln(var1/var0) / (1/var0 - 1/var1).
  double n = static_cast<double>(n_samples);
  return n * std::log(var1 / var0) / (1.0 / var0 - 1.0 / var1);
}

double radiometer_min_error_sum(int n_samples, double var0, double var1) {
  if (var1 <= var0) return 1.0;
  double g = radiometer_threshold(n_samples, var0, var1);
  double miss = gamma_cdf_shape_scale(n_samples, var1, g);       // on, below g
  double false_alarm = 1.0 - gamma_cdf_shape_scale(n_samples, var0, g);
  return false_alarm + miss;
}

}  // namespace isac
