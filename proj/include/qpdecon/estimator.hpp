#pragma once

#include "qpdecon/constraints.hpp"
#include "qpdecon/discretize.hpp"
#include "qpdecon/error.hpp"
#include "qpdecon/qp_core.hpp"
#include "qpdecon/regularization.hpp"
#include "qpdecon/selection.hpp"

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qpdecon {

//! The nine probabilities 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99.
const std::vector<double>& default_probabilities();

struct SolverStats
{
  int iterations{ 0 };
  double kkt_residual{ 0.0 };
  double objective{ 0.0 };
  double max_violation{ 0.0 };
  SolverStatus status{ SolverStatus::Optimal };
  std::optional<int> mode_index;
};

struct Diagnostics
{
  std::optional<SureCurve> sure;
  //! Curve of the regularizer that lost the automatic comparison.
  std::optional<SureCurve> sure_other;
  std::optional<ScreeCurve> scree;
  SolverStats solver;
  std::vector<std::string> warnings;
};

struct DensityEstimate
{
  Grid grid;
  Eigen::VectorXd pdf;
  Eigen::VectorXd cdf;
  double lambda_used{ 0.0 };
  RegularizerKind regularizer_used{ RegularizerKind::SecondDerivative };
  std::string constraints_used;
  long n{ 0 };
  std::vector<std::pair<double, double>> quantiles;
  Diagnostics diagnostics;
};

enum class LambdaRule
{
  Fixed,
  Sure,
  Scree
};

struct LambdaChoice
{
  LambdaRule rule{ LambdaRule::Sure };
  std::optional<double> value;

  //! "sure", "scree", "scree:<v>" or a number.
  static LambdaChoice parse(const std::string& text);
  std::string to_string() const;
};

struct FitOptions
{
  ConstraintSpec constraints{};
  //! Empty means choose the regularizer by minimized SURE.
  std::optional<RegularizerKind> regularizer{};
  LambdaChoice lambda{};
  //! Grid size; 0 means the default rule.
  int bins{ 0 };
  std::vector<double> lambda_grid{ default_lambda_grid() };
  SureMode sure_mode{ SureMode::AllConstraints };
  bool full_penalty{ false };
  std::vector<double> probabilities{ default_probabilities() };
  int threads{ 1 };
  SolverOptions solver{};
};

//! Thrown by fit when the scree rule is requested without a value. It
//! carries the curve so the caller can show it.
class SelectionRequiredError : public DeconError
{
public:
  explicit SelectionRequiredError(ScreeCurve curve, std::optional<double> lambda_sure);
  const ScreeCurve& curve() const { return curve_; }
  const std::optional<double>& lambda_sure() const { return lambda_sure_; }

private:
  ScreeCurve curve_;
  std::optional<double> lambda_sure_;
};

//! Full pipeline: grid, histogram, C, constraints, lambda/regularizer
//! selection, final solve and the feasibility recheck.
DensityEstimate fit(std::span<const double> data,
                    const NoiseModel& noise,
                    const FitOptions& options = {});

//! Builds the problem template the pipeline would solve (lambda left at 0).
DeconProblem build_problem(std::span<const double> data,
                           const NoiseModel& noise,
                           const FitOptions& options,
                           Eigen::VectorXd* gaussian_ref = nullptr);

//! cdf[j] = delta (sum_{i<j} pdf_i + pdf_j / 2); the last entry is set to 1.
Eigen::VectorXd cdf_from_pdf(const Eigen::VectorXd& pdf, double delta);

//! Inverse of the piecewise-linear cdf through the bin edges.
double quantile(const Grid& grid, const Eigen::VectorXd& pdf, double p);
double quantile(const DensityEstimate& estimate, double p);

//! Negatives set to zero, then rescaled so delta * sum = 1. A vector that
//! already is a density is returned unchanged.
Eigen::VectorXd retro_in(const Eigen::VectorXd& raw, double delta);

} // namespace qpdecon
