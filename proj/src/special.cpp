#include "qpdecon/special.hpp"

#include "qpdecon/error.hpp"

#include <cmath>
#include <limits>

namespace qpdecon {

namespace {

constexpr int kMaxTerms = 10000;
constexpr double kEps = 1e-16;

double series_p(double a, double x, double log_prefix)
{
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < kMaxTerms; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps)
      break;
  }
  return sum * std::exp(log_prefix);
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double continued_fraction_q(double a, double x, double log_prefix)
{
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny)
      d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny)
      c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps)
      break;
  }
  return std::exp(log_prefix) * h;
}

} // namespace

double gamma_p(double a, double x)
{
  if (!(a > 0) || !(x >= 0))
    throw DeconError(ErrorKind::InvalidSpec, "gamma_p needs a > 0 and x >= 0");
  if (x == 0.0)
    return 0.0;
  if (std::isinf(x))
    return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0)
    return std::min(1.0, series_p(a, x, log_prefix));
  return std::max(0.0, 1.0 - continued_fraction_q(a, x, log_prefix));
}

double normal_cdf(double z)
{
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw DeconError(ErrorKind::InvalidProbability, "probability must lie in (0, 1)");
  return bisect_quantile(normal_cdf, p, -40.0, 40.0, 1e-13);
}

} // namespace qpdecon
