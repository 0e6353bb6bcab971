#pragma once

#include "qpdecon/constraints.hpp"
#include "qpdecon/discretize.hpp"
#include "qpdecon/distributions.hpp"
#include "qpdecon/kd_baseline.hpp"
#include "qpdecon/regularization.hpp"
#include "qpdecon/selection.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qpdecon {

enum class MethodFamily
{
  QP,
  KD
};

enum class ParamRule
{
  Fixed,
  Sure,   //!< QP only: lambda chosen per replicate by SURE
  Rule,   //!< KD only: rule-of-thumb bandwidth
  Oracle  //!< grid search over the aggregate MAE
};

//! One estimator of a simulation. Text form:
//!
//!   <base>[@<param>][/<regularizer>]
//!
//! base: qp-retro, qp-in, qp-incm, qp-incms, qp-incu, qp-incus, qp{<tokens>},
//!       kd-rect, kd-triw
//! param: a number, "sure", "rule" or "oracle"
//! regularizer (QP only): d2, gauss or auto (default)
//!
//! The letters after "in" add shape constraints located from the true
//! distribution: c convex tails beyond the inflection points, m monotone
//! away from the mode, u unimodal with unknown mode, s support from the
//! lower end of the true support. qp{...} takes a literal constraint list.
struct MethodSpec
{
  std::string text;
  MethodFamily family{ MethodFamily::QP };
  //! Equality-only solve followed by retro-in.
  bool retro{ false };
  ConstraintSpec constraints{};
  KdKernel kernel{ KdKernel::Rectangular };
  ParamRule rule{ ParamRule::Sure };
  double value{ 0.0 };
  //! Empty (the default) means choose by SURE.
  std::optional<RegularizerKind> regularizer;

  static MethodSpec parse(const std::string& text, const Distribution& truth);
};

//! Splits a comma-separated method list, keeping braces together.
std::vector<std::string> split_method_list(const std::string& text);

struct SimulationSpec
{
  Distribution truth{ GammaDist{ 5.0, 1.0 } };
  NoiseModel noise{ GaussianNoise{ 3.2 } };
  long n{ 5000 };
  int reps{ 100 };
  std::vector<MethodSpec> methods;
  std::uint64_t seed{ 42 };
  std::vector<double> probabilities;
  //! Grid size; 0 means the default rule.
  int bins{ 0 };
  std::vector<double> lambda_grid;
  std::vector<double> oracle_lambda_grid;
  std::vector<double> oracle_h_grid;
  SureMode sure_mode{ SureMode::AllConstraints };
  int threads{ 1 };
  //! Points of the error grid used for the correlation matrices.
  int correlation_points{ 100 };

  SimulationSpec();
};

struct MethodReport
{
  std::string method;
  //! Parameter actually used when fixed (oracle resolved), else NaN.
  double parameter{ 0.0 };
  std::string parameter_rule;
  std::string regularizer;

  std::vector<double> mae;
  double aggregate{ 0.0 };
  double l1_mean{ 0.0 };
  double l1_median{ 0.0 };
  //! Fraction of replicates whose L1 error exceeds three times the median.
  double l1_outlier_fraction{ 0.0 };
  std::vector<double> bias;
  std::vector<double> sd;
  std::vector<double> rmse;
  Eigen::MatrixXd correlation;
  std::vector<char> zero_columns;

  //! Per-replicate data; failed replicates hold NaN.
  Eigen::MatrixXd quantile_estimates; // reps x probabilities
  std::vector<double> l1;
  std::vector<double> lambdas;
  std::vector<int> modes;
  double max_violation{ 0.0 };

  struct LambdaSummary
  {
    double median{ 0.0 };
    double mode{ 0.0 };
    double min{ 0.0 };
    double max{ 0.0 };
  };
  std::optional<LambdaSummary> lambda_summary;

  int failures{ 0 };
  std::vector<std::string> failure_messages;
  //! Oracle search trace: (parameter, aggregate MAE).
  std::vector<std::pair<double, double>> oracle_trace;
};

struct SimulationReport
{
  std::vector<double> probabilities;
  std::vector<double> true_quantiles;
  std::vector<double> true_pdf_at_quantiles;
  std::vector<double> correlation_points;
  std::vector<MethodReport> methods;
};

double true_quantile(const Distribution& dist, double p);

//! A^{-1/2} V'V A^{-1/2} / N with A = diag(V'V / N). All-zero columns give
//! zero rows and columns and are flagged in `zero_columns`.
Eigen::MatrixXd uncentered_correlation(const Eigen::MatrixXd& V,
                                       std::vector<char>* zero_columns = nullptr);

//! sum_i mae_i / [p_i (1 - p_i)].
double aggregate_mae(const std::vector<double>& mae, const std::vector<double>& probabilities);
double aggregate_mae(const std::vector<double>& mae);

double median(std::vector<double> values);

SimulationReport run_simulation(const SimulationSpec& spec);

//! Grid search of the fixed lambda minimizing the aggregate MAE.
double oracle_lambda(const SimulationSpec& spec, const MethodSpec& method,
                     const std::vector<double>& grid,
                     std::vector<std::pair<double, double>>* trace = nullptr);

//! Grid search of the fixed bandwidth minimizing the aggregate MAE.
double oracle_bandwidth(const SimulationSpec& spec, const MethodSpec& method,
                        const std::vector<double>& grid,
                        std::vector<std::pair<double, double>>* trace = nullptr);

//! One replicate's observations Y = X + Z.
std::vector<double> simulate_observations(const SimulationSpec& spec, int replicate);

} // namespace qpdecon
