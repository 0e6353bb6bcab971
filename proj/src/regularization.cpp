#include "qpdecon/regularization.hpp"

#include "qpdecon/error.hpp"

#include <cmath>
#include <numbers>

namespace qpdecon {

std::string to_string(RegularizerKind kind)
{
  return kind == RegularizerKind::SecondDerivative ? "d2" : "gauss";
}

RegularizerKind regularizer_from_string(const std::string& name)
{
  if (name == "d2")
    return RegularizerKind::SecondDerivative;
  if (name == "gauss")
    return RegularizerKind::GaussianReference;
  throw DeconError(ErrorKind::InvalidSpec, "unknown regularizer '" + name + "'");
}

Eigen::MatrixXd second_difference_matrix(int K)
{
  if (K < 3)
    throw DeconError(ErrorKind::GridTooSmall, "second differences need K >= 3");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K - 2, K);
  for (int j = 0; j < K - 2; ++j) {
    D(j, j) = 1.0;
    D(j, j + 1) = -2.0;
    D(j, j + 2) = 1.0;
  }
  return D;
}

Eigen::VectorXd gaussian_reference(std::span<const double> data,
                                   const NoiseModel& noise,
                                   const Grid& grid)
{
  const auto n = static_cast<double>(data.size());
  if (data.size() < 2)
    throw DeconError(ErrorKind::DegenerateData,
                     "the Gaussian reference needs at least two observations");
  double mean = 0.0;
  for (double y : data)
    mean += y;
  mean /= n;
  double ss = 0.0;
  for (double y : data)
    ss += (y - mean) * (y - mean);
  const double var_y = ss / (n - 1.0);
  const double d = grid.delta();
  const double var = std::max(var_y - noise.variance(), d * d);

  Eigen::VectorXd ref(grid.size());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
  for (int j = 0; j < grid.size(); ++j) {
    const double z = grid.point(j) - mean;
    ref(j) = norm * std::exp(-0.5 * z * z / var);
  }
  return ref;
}

Regularizer Regularizer::second_derivative()
{
  return Regularizer{};
}

Regularizer Regularizer::gaussian(Eigen::VectorXd reference)
{
  Regularizer r;
  r.kind_ = RegularizerKind::GaussianReference;
  r.reference_ = std::move(reference);
  return r;
}

Regularizer Regularizer::restricted(int a, int b) const
{
  if (kind_ == RegularizerKind::SecondDerivative)
    return *this;
  return gaussian(reference_.segment(a, b - a + 1));
}

Eigen::MatrixXd Regularizer::quadratic(int dim) const
{
  if (kind_ == RegularizerKind::SecondDerivative) {
    const Eigen::MatrixXd D = second_difference_matrix(dim);
    return D.transpose() * D;
  }
  return Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::VectorXd Regularizer::target(int dim) const
{
  if (kind_ == RegularizerKind::SecondDerivative)
    return Eigen::VectorXd::Zero(dim);
  if (reference_.size() != dim)
    throw DeconError(ErrorKind::DimensionMismatch,
                     "reference length differs from the decision vector");
  return reference_;
}

double Regularizer::penalty(const Eigen::VectorXd& f) const
{
  if (kind_ == RegularizerKind::SecondDerivative) {
    if (f.size() < 3)
      throw DeconError(ErrorKind::GridTooSmall, "second differences need K >= 3");
    double acc = 0.0;
    for (Eigen::Index j = 0; j + 2 < f.size(); ++j) {
      const double d2 = f(j) - 2.0 * f(j + 1) + f(j + 2);
      acc += d2 * d2;
    }
    return acc;
  }
  if (f.size() != reference_.size())
    throw DeconError(ErrorKind::DimensionMismatch,
                     "penalty vector length differs from the reference");
  return (f - reference_).squaredNorm();
}

} // namespace qpdecon
