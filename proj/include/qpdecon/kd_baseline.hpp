#pragma once

#include "qpdecon/discretize.hpp"

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <span>
#include <string>

namespace qpdecon {

enum class KdKernel
{
  Rectangular,
  Triweight
};

std::string to_string(KdKernel kernel);
KdKernel kernel_from_string(const std::string& name);

//! Fourier transform of the kernel: 1 or (1 - t^2)^3 on [-1, 1], else 0.
double kernel_ft(KdKernel kernel, double t);

struct KdConfig
{
  KdKernel kernel{ KdKernel::Rectangular };
  double bandwidth{ 1.0 };
  //! Simpson nodes on [-1/h, 1/h]; must be odd.
  int omega_points{ 4097 };
};

using CharacteristicFunction = std::function<std::complex<double>(double)>;

//! Deconvolution kernel estimate at the given points (raw, may be negative).
//! Throws NumericalOverflow when the noise characteristic function vanishes
//! inside the kernel's frequency band.
Eigen::VectorXd kd_estimate(std::span<const double> data,
                            const CharacteristicFunction& noise_cf,
                            const Eigen::VectorXd& points,
                            const KdConfig& config);

Eigen::VectorXd kd_estimate(std::span<const double> data,
                            const NoiseModel& noise,
                            const Grid& grid,
                            const KdConfig& config);

//! sqrt(2) * sd(Z) * sqrt(log n).
double rule_of_thumb_bandwidth(long n, const NoiseModel& noise);

} // namespace qpdecon
