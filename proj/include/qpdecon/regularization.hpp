#pragma once

#include "qpdecon/discretize.hpp"

#include <Eigen/Dense>
#include <span>
#include <string>

namespace qpdecon {

enum class RegularizerKind
{
  SecondDerivative,
  GaussianReference
};

std::string to_string(RegularizerKind kind);
RegularizerKind regularizer_from_string(const std::string& name);

//! (K-2) x K matrix with rows (1, -2, 1).
Eigen::MatrixXd second_difference_matrix(int K);

//! Normal pdf with mean mean(data) and variance max(var(data) - var(Z), delta^2)
//! evaluated on the grid; not renormalized.
Eigen::VectorXd gaussian_reference(std::span<const double> data,
                                   const NoiseModel& noise,
                                   const Grid& grid);

//! Penalty Q(f). Second-derivative kind: ||D2 f||^2. Gaussian kind:
//! ||f - f_reg||^2.
class Regularizer
{
public:
  static Regularizer second_derivative();
  static Regularizer gaussian(Eigen::VectorXd reference);

  RegularizerKind kind() const { return kind_; }
  const Eigen::VectorXd& reference() const { return reference_; }

  //! Same regularizer for a decision vector restricted to indices a..b:
  //! the reference is sliced, D2 is rebuilt on the reduced size.
  Regularizer restricted(int a, int b) const;

  //! Quadratic part M of Q(f) = f' M f - 2 r' f + const (D2'D2 or I).
  Eigen::MatrixXd quadratic(int dim) const;
  //! Linear target r (zero or f_reg).
  Eigen::VectorXd target(int dim) const;

  double penalty(const Eigen::VectorXd& f) const;

private:
  RegularizerKind kind_{ RegularizerKind::SecondDerivative };
  Eigen::VectorXd reference_;
};

inline double penalty_value(const Regularizer& reg, const Eigen::VectorXd& f)
{
  return reg.penalty(f);
}

} // namespace qpdecon
