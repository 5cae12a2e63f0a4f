#pragma once

// Scalar special functions used by the quantizer and the randomness tests.
namespace fdkg::special {

/// Complementary error function.
double erfc(double x);

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile; |error| well below 1e-8 on (0, 1).
/// Throws DomainError for p outside (0, 1).
double inverse_normal_cdf(double p);

/// Upper regularized incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double igamc(double a, double x);

}  // namespace fdkg::special
