#pragma once

#include <cstdint>

namespace isac {

/// Regularized lower incomplete gamma P(a,x); Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Chi-square CDF with `dof` degrees of freedom.
double chi2_cdf(int dof, double x);

/// Chi-square quantile by bracketed bisection on the regularized gamma CDF.
/// |cdf(result) - p| converges below 1e-10.
double chi2_quantile(int dof, double p);

/// CDF of Gamma(shape, scale) at x (shape may be large, e.g. a blocklength).
double gamma_cdf_shape_scale(double shape, double scale, double x);

/// Divergence rate of two zero-mean complex Gaussians per observation:
/// f(x) = x - ln(1+x) with x the excess-variance ratio. f(0)=0, increasing.
double kl_rate(double x);

/// Inverse of kl_rate on x >= 0: smallest x with kl_rate(x) = target.
/// target = 0 returns exactly 0.
double kl_rate_inverse(double target);

/// Minimum sum of detection error probabilities for an N-sample radiometer
/// deciding between CSCG noise variances var0 (off) and var1 >= var0 (on),
/// using the likelihood-ratio threshold. Returns 1 when var1 <= var0.
double radiometer_min_error_sum(int n_samples, double var0, double var1);

/// The likelihood-ratio threshold on the energy statistic for the same test.
double radiometer_threshold(int n_samples, double var0, double var1);

}  // namespace isac
