#pragma once

namespace qpdecon {

//! Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
double gamma_p(double a, double x);

//! Standard normal cdf and its inverse.
double normal_cdf(double z);
double normal_quantile(double p);

//! Smallest x in [lo, hi] with cdf(x) >= p, found by bisection until the
//! bracket is narrower than `tol`.
template <class Cdf>
double bisect_quantile(const Cdf& cdf, double p, double lo, double hi, double tol = 1e-10)
{
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi)
      break;
    if (cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace qpdecon
