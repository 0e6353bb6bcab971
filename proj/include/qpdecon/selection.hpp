#pragma once

#include "qpdecon/qp_core.hpp"

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace qpdecon {

//! Minimizer of the equality-only problem as an affine map of the histogram:
//! f = B fY + b on the support columns (B is m x K, b has length m).
struct ClosedFormSolution
{
  Eigen::MatrixXd B;
  Eigen::VectorXd b;
  double lambda{ 0.0 };
  RegularizerKind kind{ RegularizerKind::SecondDerivative };
  SupportRange range{ 0, 0 };

  //! Full-length estimate for a histogram (zeros outside the support).
  Eigen::VectorXd apply(const Eigen::VectorXd& fY) const;
};

//! Lagrange-multiplier solution of the equality-only problem. The jitter is
//! the solver's, applied to D = C'C + lambda M so both routes agree.
ClosedFormSolution closed_form_equality(const Eigen::MatrixXd& C,
                                        double delta,
                                        double lambda,
                                        const Regularizer& regularizer,
                                        std::optional<SupportRange> support = std::nullopt,
                                        double jitter = SolverOptions{}.jitter);

ClosedFormSolution closed_form_equality(const DeconProblem& problem);

//! Multinomial covariance of the histogram heights.
Eigen::MatrixXd multinomial_sigma(const HistogramDensity& fY);

//! Covariance penalty 2 tr[C B diag(fY)] / (n delta). With `full` the
//! -delta^2 fY fY' term of the multinomial covariance is kept as well.
double sure_penalty(const Eigen::MatrixXd& C,
                    const ClosedFormSolution& closed_form,
                    const HistogramDensity& fY,
                    bool full = false);

enum class SureMode
{
  EqualityOnly,
  AllConstraints
};

const char* to_string(SureMode mode);

struct SureCurve
{
  std::vector<double> lambdas;
  std::vector<double> err;
  std::vector<double> penalty;
  std::vector<double> sure;
  //! Entries whose solve failed are excluded from the argmin.
  std::vector<char> valid;
  double chosen_lambda{ 0.0 };
  int chosen_index{ -1 };
  RegularizerKind chosen_regularizer{ RegularizerKind::SecondDerivative };
  SureMode mode{ SureMode::AllConstraints };

  double min_sure() const { return sure[static_cast<std::size_t>(chosen_index)]; }
};

struct ScreeCurve
{
  std::vector<double> lambdas;
  std::vector<double> q_values;
  std::vector<double> err;
  std::optional<double> elbow_lambda;
  RegularizerKind regularizer{ RegularizerKind::SecondDerivative };
};

//! 61 log-spaced values on [1e-6, 1e2].
std::vector<double> default_lambda_grid();
std::vector<double> log_grid(double lo, double hi, int count);

struct SelectionOptions
{
  SureMode mode{ SureMode::AllConstraints };
  bool full_penalty{ false };
  int threads{ 1 };
  SolverOptions solver{};
};

SureCurve select_lambda(const DeconProblem& problem,
                        const std::vector<double>& lambdas,
                        const SelectionOptions& options = {});

struct RegularizerSelection
{
  RegularizerKind kind{ RegularizerKind::SecondDerivative };
  double lambda{ 0.0 };
  SureCurve second_derivative;
  SureCurve gaussian;

  const SureCurve& chosen() const
  {
    return kind == RegularizerKind::SecondDerivative ? second_derivative : gaussian;
  }
};

//! Runs select_lambda for both regularizers and keeps the smaller minimized
//! SURE; ties go to the second-derivative penalty.
RegularizerSelection select_regularizer(const DeconProblem& problem,
                                        const Eigen::VectorXd& gaussian_ref,
                                        const std::vector<double>& lambdas,
                                        const SelectionOptions& options = {});

//! Index of maximum discrete curvature of (log x, log y) after scaling both
//! coordinates to the unit box. A flat curve gives index 0.
int elbow_index(const std::vector<double>& x, const std::vector<double>& y);

ScreeCurve scree_curve(const DeconProblem& problem,
                       const std::vector<double>& lambdas,
                       const SelectionOptions& options = {});

} // namespace qpdecon
