#include "qpdecon/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qpdecon {

const std::vector<double>& default_probabilities()
{
  static const std::vector<double> p{ 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99 };
  return p;
}

LambdaChoice LambdaChoice::parse(const std::string& text)
{
  LambdaChoice c;
  if (text == "sure") {
    c.rule = LambdaRule::Sure;
    return c;
  }
  std::string number = text;
  if (text == "scree") {
    c.rule = LambdaRule::Scree;
    return c;
  }
  if (text.rfind("scree:", 0) == 0) {
    c.rule = LambdaRule::Scree;
    number = text.substr(6);
  } else {
    c.rule = LambdaRule::Fixed;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != number.size() || !(v >= 0) || !std::isfinite(v))
    throw DeconError(ErrorKind::InvalidSpec, "lambda must be 'sure', 'scree', 'scree:<value>' "
                                             "or a nonnegative number, got '" + text + "'");
  c.value = v;
  return c;
}

std::string LambdaChoice::to_string() const
{
  std::ostringstream os;
  os.precision(15);
  switch (rule) {
    case LambdaRule::Sure:
      return "sure";
    case LambdaRule::Scree:
      os << "scree";
      if (value)
        os << ':' << *value;
      return os.str();
    case LambdaRule::Fixed:
      os << value.value_or(0.0);
      return os.str();
  }
  return "sure";
}

SelectionRequiredError::SelectionRequiredError(ScreeCurve curve, std::optional<double> lambda_sure)
  : DeconError(ErrorKind::SelectionRequired,
               "the scree rule needs a lambda chosen from the plot; rerun with --lambda scree:<value>")
  , curve_(std::move(curve))
  , lambda_sure_(lambda_sure)
{
}

DeconProblem build_problem(std::span<const double> data,
                           const NoiseModel& noise,
                           const FitOptions& options,
                           Eigen::VectorXd* gaussian_ref)
{
  const long n = static_cast<long>(data.size());
  if (n == 0)
    throw DeconError(ErrorKind::DegenerateData, "no observations");
  const int K = options.bins > 0 ? options.bins : default_bin_count(n);
  const Grid grid = build_grid(data, K);
  DeconProblem p{ convolution_matrix(grid, noise),
                  histogram(data, grid),
                  options.constraints.resolve(grid),
                  Regularizer::second_derivative(),
                  0.0 };
  const bool need_ref = !options.regularizer ||
                        *options.regularizer == RegularizerKind::GaussianReference;
  if (need_ref) {
    Eigen::VectorXd ref = gaussian_reference(data, noise, grid);
    if (options.regularizer)
      p.regularizer = Regularizer::gaussian(ref);
    if (gaussian_ref)
      *gaussian_ref = std::move(ref);
  }
  return p;
}

DensityEstimate fit(std::span<const double> data, const NoiseModel& noise, const FitOptions& options)
{
  Diagnostics diag;
  if (data.size() < 30)
    diag.warnings.push_back("fewer than 30 observations; the estimate is unreliable");

  Eigen::VectorXd ref;
  DeconProblem problem = build_problem(data, noise, options, &ref);

  SelectionOptions sel;
  sel.mode = options.sure_mode;
  sel.full_penalty = options.full_penalty;
  sel.threads = options.threads;
  sel.solver = options.solver;

  const LambdaChoice& choice = options.lambda;
  const bool fixed_value = choice.rule != LambdaRule::Sure && choice.value.has_value();

  // SURE runs whenever lambda or the regularizer has to be chosen from data.
  const bool run_sure = choice.rule == LambdaRule::Sure || !options.regularizer ||
                        (choice.rule == LambdaRule::Scree && !choice.value);
  double lambda = choice.value.value_or(0.0);
  if (run_sure) {
    const std::vector<double> grid =
      fixed_value ? std::vector<double>{ *choice.value } : options.lambda_grid;
    if (!options.regularizer) {
      RegularizerSelection rs = select_regularizer(problem, ref, grid, sel);
      problem.regularizer = rs.kind == RegularizerKind::SecondDerivative
                              ? Regularizer::second_derivative()
                              : Regularizer::gaussian(ref);
      diag.sure = rs.chosen();
      diag.sure_other = rs.kind == RegularizerKind::SecondDerivative ? rs.gaussian
                                                                     : rs.second_derivative;
    } else {
      diag.sure = select_lambda(problem, grid, sel);
    }
    if (choice.rule == LambdaRule::Sure)
      lambda = diag.sure->chosen_lambda;
  }

  if (choice.rule == LambdaRule::Scree) {
    ScreeCurve scree = scree_curve(problem, options.lambda_grid, sel);
    if (!choice.value) {
      std::optional<double> ls;
      if (diag.sure)
        ls = diag.sure->chosen_lambda;
      throw SelectionRequiredError(std::move(scree), ls);
    }
    diag.scree = std::move(scree);
  }

  problem.lambda = lambda;
  const QPSolution sol = solve(problem, options.solver);
  if (sol.status != SolverStatus::Optimal)
    diag.warnings.push_back(std::string("solver stopped with status ") + to_string(sol.status));

  diag.solver.iterations = sol.iterations;
  diag.solver.kkt_residual = sol.kkt_residual;
  diag.solver.objective = sol.objective;
  diag.solver.status = sol.status;
  diag.solver.mode_index = sol.mode_index;
  diag.solver.max_violation = max_violation(problem.constraints, sol.fX, sol.mode_index);
  if (diag.solver.max_violation > 1e-8)
    throw DeconError(ErrorKind::SolverFailure,
                     "solution violates the declared constraints by " +
                       std::to_string(diag.solver.max_violation));

  DensityEstimate est{ problem.fY.grid, sol.fX.cwiseMax(0.0), {}, lambda,
                       problem.regularizer.kind(), options.constraints.to_string(),
                       static_cast<long>(data.size()), {}, std::move(diag) };
  est.cdf = cdf_from_pdf(est.pdf, est.grid.delta());
  for (double p : options.probabilities)
    est.quantiles.emplace_back(p, quantile(est, p));
  return est;
}

Eigen::VectorXd cdf_from_pdf(const Eigen::VectorXd& pdf, double delta)
{
  Eigen::VectorXd cdf(pdf.size());
  double below = 0.0;
  for (Eigen::Index j = 0; j < pdf.size(); ++j) {
    cdf(j) = std::min(1.0, delta * (below + 0.5 * pdf(j)));
    below += pdf(j);
  }
  if (pdf.size() > 0)
    cdf(pdf.size() - 1) = 1.0;
  return cdf;
}

double quantile(const Grid& grid, const Eigen::VectorXd& pdf, double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw DeconError(ErrorKind::InvalidProbability, "probability must lie in (0, 1)");
  if (pdf.size() != grid.size())
    throw DeconError(ErrorKind::DimensionMismatch, "pdf length differs from the grid");
  const double d = grid.delta();
  const Eigen::Index K = pdf.size();
  std::vector<double> edge_cdf(static_cast<std::size_t>(K + 1), 0.0);
  for (Eigen::Index j = 0; j < K; ++j)
    edge_cdf[static_cast<std::size_t>(j + 1)] =
      edge_cdf[static_cast<std::size_t>(j)] + d * std::max(0.0, pdf(j));
  const double total = edge_cdf.back();
  if (!(total > 0))
    throw DeconError(ErrorKind::AllZero, "pdf has no positive mass");
  const double target = p * total;
  const auto it = std::lower_bound(edge_cdf.begin() + 1, edge_cdf.end(), target);
  const auto j = static_cast<std::size_t>(std::distance(edge_cdf.begin(), it) - 1);
  const double lo = edge_cdf[j];
  const double hi = edge_cdf[j + 1];
  const double left = grid.x1() - 0.5 * d + static_cast<double>(j) * d;
  const double frac = hi > lo ? (target - lo) / (hi - lo) : 0.0;
  const double x = left + std::clamp(frac, 0.0, 1.0) * d;
  return std::clamp(x, grid.x1() - 0.5 * d, grid.xK() + 0.5 * d);
}

double quantile(const DensityEstimate& estimate, double p)
{
  return quantile(estimate.grid, estimate.pdf, p);
}

Eigen::VectorXd retro_in(const Eigen::VectorXd& raw, double delta)
{
  if (raw.size() > 0 && raw.minCoeff() >= 0.0 && std::abs(delta * raw.sum() - 1.0) <= 1e-12)
    return raw;
  Eigen::VectorXd out = raw.cwiseMax(0.0);
  const double mass = delta * out.sum();
  if (!(mass > 0.0))
    throw DeconError(ErrorKind::AllZero, "no positive entries left after zeroing negatives");
  out /= mass;
  return out;
}

} // namespace qpdecon
