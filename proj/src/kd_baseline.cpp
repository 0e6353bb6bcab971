#include "qpdecon/kd_baseline.hpp"

#include "qpdecon/error.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace qpdecon {

std::string to_string(KdKernel kernel)
{
  return kernel == KdKernel::Rectangular ? "rect" : "triw";
}

KdKernel kernel_from_string(const std::string& name)
{
  if (name == "rect")
    return KdKernel::Rectangular;
  if (name == "triw")
    return KdKernel::Triweight;
  throw DeconError(ErrorKind::InvalidSpec, "unknown kernel '" + name + "'");
}

double kernel_ft(KdKernel kernel, double t)
{
  if (std::abs(t) > 1.0)
    return 0.0;
  if (kernel == KdKernel::Rectangular)
    return 1.0;
  const double u = 1.0 - t * t;
  return u * u * u;
}

Eigen::VectorXd kd_estimate(std::span<const double> data,
                            const CharacteristicFunction& noise_cf,
                            const Eigen::VectorXd& points,
                            const KdConfig& config)
{
  if (data.empty())
    throw DeconError(ErrorKind::DegenerateData, "no observations");
  if (!(config.bandwidth > 0) || !std::isfinite(config.bandwidth))
    throw DeconError(ErrorKind::InvalidSpec, "bandwidth must be positive");
  if (config.omega_points < 3 || config.omega_points % 2 == 0)
    throw DeconError(ErrorKind::InvalidSpec, "Simpson needs an odd number of nodes >= 3");

  // The integrand at -w is the conjugate of the one at w, so the symmetric
  // Simpson rule reduces to twice the real part over [0, 1/h].
  const int half = config.omega_points / 2; // intervals on [0, 1/h]
  const double wmax = 1.0 / config.bandwidth;
  const double step = wmax / half;
  const double n = static_cast<double>(data.size());

  // exp(i k step y) is advanced by one rotation per node.
  std::vector<std::complex<double>> rot(data.size()), cur(data.size(), 1.0);
  for (std::size_t j = 0; j < data.size(); ++j)
    rot[j] = std::polar(1.0, step * data[j]);

  std::vector<double> omega(static_cast<std::size_t>(half + 1));
  std::vector<std::complex<double>> weight(omega.size());
  for (int k = 0; k <= half; ++k) {
    std::complex<double> sum = 0.0;
    if (k > 0) {
      for (std::size_t j = 0; j < data.size(); ++j) {
        cur[j] *= rot[j];
        sum += cur[j];
      }
    } else {
      sum = n;
    }
    const double w = k * step;
    omega[static_cast<std::size_t>(k)] = w;
    const double simpson = (k == 0 || k == half) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    const double phiK = kernel_ft(config.kernel, w * config.bandwidth);
    if (phiK == 0.0) {
      weight[static_cast<std::size_t>(k)] = 0.0;
      continue;
    }
    const std::complex<double> phiZ = noise_cf(w);
    if (!(std::abs(phiZ) > 1e-300))
      throw DeconError(ErrorKind::NumericalOverflow,
                       "noise characteristic function underflows inside the kernel band; "
                       "increase the bandwidth");
    const std::complex<double> phiY = sum / n;
    const std::complex<double> ratio = phiK * phiY / phiZ;
    if (!std::isfinite(ratio.real()) || !std::isfinite(ratio.imag()))
      throw DeconError(ErrorKind::NumericalOverflow, "deconvolution ratio is not finite");
    weight[static_cast<std::size_t>(k)] = simpson * step / 3.0 * ratio;
  }

  Eigen::VectorXd out(points.size());
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    const double x = points(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < omega.size(); ++k) {
      const std::complex<double>& wk = weight[k];
      if (wk == 0.0)
        continue;
      const double a = omega[k] * x;
      acc += wk.real() * std::cos(a) + wk.imag() * std::sin(a);
    }
    out(i) = acc / std::numbers::pi;
  }
  return out;
}

Eigen::VectorXd kd_estimate(std::span<const double> data,
                            const NoiseModel& noise,
                            const Grid& grid,
                            const KdConfig& config)
{
  return kd_estimate(data, [&](double w) { return noise.cf(w); }, grid.points(), config);
}

double rule_of_thumb_bandwidth(long n, const NoiseModel& noise)
{
  if (n < 2)
    throw DeconError(ErrorKind::DegenerateData, "the rule of thumb needs n >= 2");
  return std::sqrt(2.0) * noise.stddev() * std::sqrt(std::log(static_cast<double>(n)));
}

} // namespace qpdecon
