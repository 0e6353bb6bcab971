#include "qpdecon/selection.hpp"

#include "qpdecon/error.hpp"
#include "qpdecon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpdecon {

Eigen::VectorXd ClosedFormSolution::apply(const Eigen::VectorXd& fY) const
{
  Eigen::VectorXd full = Eigen::VectorXd::Zero(B.cols());
  full.segment(range.a, range.size()) = B * fY + b;
  return full;
}

ClosedFormSolution closed_form_equality(const Eigen::MatrixXd& C_full,
                                        double delta,
                                        double lambda,
                                        const Regularizer& regularizer,
                                        std::optional<SupportRange> support,
                                        double jitter)
{
  const int K = static_cast<int>(C_full.cols());
  const SupportRange range = support.value_or(SupportRange{ 0, K - 1 });
  const int m = range.size();
  const Eigen::MatrixXd C = apply_support(C_full, range);
  const Regularizer reg = regularizer.restricted(range.a, range.b);

  Eigen::MatrixXd D = C.transpose() * C + lambda * reg.quadratic(m);
  double scale = D.trace() / m;
  if (!(scale > 0))
    scale = 1.0;
  D.diagonal().array() += jitter * scale;
  const Eigen::LLT<Eigen::MatrixXd> llt(D);
  if (llt.info() != Eigen::Success)
    throw DeconError(ErrorKind::SingularD, "C'C + lambda M is not positive definite");

  const Eigen::MatrixXd W = llt.solve(C.transpose());
  const Eigen::VectorXd v = llt.solve(Eigen::VectorXd::Ones(m));
  const Eigen::VectorXd w = llt.solve(lambda * reg.target(m));
  const double s = v.sum();
  if (!(s > 0) || !std::isfinite(s))
    throw DeconError(ErrorKind::SingularD, "1'D^{-1}1 is not positive");

  ClosedFormSolution out;
  out.B = W - v * (W.colwise().sum() / s);
  out.b = w - v * (w.sum() / s) + v / (delta * s);
  out.lambda = lambda;
  out.kind = regularizer.kind();
  out.range = range;
  return out;
}

ClosedFormSolution closed_form_equality(const DeconProblem& problem)
{
  return closed_form_equality(problem.C.entries, problem.constraints.delta,
                              problem.lambda, problem.regularizer,
                              problem.constraints.support_range());
}

Eigen::MatrixXd multinomial_sigma(const HistogramDensity& fY)
{
  const double d = fY.grid.delta();
  const Eigen::VectorXd p = d * fY.heights;
  const double scale = 1.0 / (static_cast<double>(fY.n) * d * d);
  Eigen::MatrixXd S = -(p * p.transpose());
  S.diagonal() += p;
  return scale * S;
}

double sure_penalty(const Eigen::MatrixXd& C_full,
                    const ClosedFormSolution& cf,
                    const HistogramDensity& fY,
                    bool full)
{
  if (cf.B.cols() != fY.heights.size() || C_full.rows() != fY.heights.size())
    throw DeconError(ErrorKind::DimensionMismatch, "penalty dimensions disagree");
  const Eigen::MatrixXd C = apply_support(C_full, cf.range);
  const double n = static_cast<double>(fY.n);
  const double d = fY.grid.delta();
  double trace = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    trace += C.row(i).dot(cf.B.col(i)) * fY.heights(i);
  double g = 2.0 * trace / (n * d);
  if (full) {
    const Eigen::VectorXd Bf = cf.B * fY.heights;
    g -= 2.0 * fY.heights.dot(C * Bf) / n;
  }
  return g;
}

const char* to_string(SureMode mode)
{
  return mode == SureMode::EqualityOnly ? "equality" : "all";
}

std::vector<double> log_grid(double lo, double hi, int count)
{
  if (!(lo > 0) || !(hi >= lo) || count < 1)
    throw DeconError(ErrorKind::InvalidSpec, "log grid needs 0 < lo <= hi and count >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  return out;
}

std::vector<double> default_lambda_grid()
{
  return log_grid(1e-6, 1e2, 61);
}

namespace {

void check_grid(const std::vector<double>& lambdas)
{
  if (lambdas.empty())
    throw DeconError(ErrorKind::InvalidSpec, "lambda grid is empty");
  for (double l : lambdas)
    if (!(l > 0) || !std::isfinite(l))
      throw DeconError(ErrorKind::InvalidSpec, "lambda grid values must be positive");
}

} // namespace

SureCurve select_lambda(const DeconProblem& problem,
                        const std::vector<double>& lambdas,
                        const SelectionOptions& options)
{
  check_grid(lambdas);
  const std::size_t L = lambdas.size();
  SureCurve curve;
  curve.lambdas = lambdas;
  curve.err.assign(L, std::numeric_limits<double>::quiet_NaN());
  curve.penalty = curve.err;
  curve.sure = curve.err;
  curve.valid.assign(L, 0);
  curve.chosen_regularizer = problem.regularizer.kind();
  curve.mode = options.mode;

  const DeconProblem base =
    options.mode == SureMode::EqualityOnly ? problem.equality_only() : problem;

  parallel_for(static_cast<int>(L), options.threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    const DeconProblem p = base.with_lambda(lambdas[k]);
    try {
      const ClosedFormSolution cf = closed_form_equality(p);
      const QPSolution s = solve(p, options.solver);
      if (s.status != SolverStatus::Optimal)
        return;
      curve.err[k] = fit_error(p, s.fX);
      curve.penalty[k] = sure_penalty(p.C.entries, cf, p.fY, options.full_penalty);
      curve.sure[k] = curve.err[k] + curve.penalty[k];
      curve.valid[k] = std::isfinite(curve.sure[k]) ? 1 : 0;
    } catch (const DeconError& e) {
      if (e.kind() != ErrorKind::Infeasible && e.kind() != ErrorKind::SingularD &&
          e.kind() != ErrorKind::SolverFailure)
        throw;
    }
  });

  for (std::size_t k = 0; k < L; ++k) {
    if (!curve.valid[k])
      continue;
    if (curve.chosen_index < 0 ||
        curve.sure[k] < curve.sure[static_cast<std::size_t>(curve.chosen_index)])
      curve.chosen_index = static_cast<int>(k);
  }
  if (curve.chosen_index < 0)
    throw DeconError(ErrorKind::SolverFailure, "no lambda on the grid could be solved");
  curve.chosen_lambda = lambdas[static_cast<std::size_t>(curve.chosen_index)];
  return curve;
}

RegularizerSelection select_regularizer(const DeconProblem& problem,
                                        const Eigen::VectorXd& gaussian_ref,
                                        const std::vector<double>& lambdas,
                                        const SelectionOptions& options)
{
  RegularizerSelection out;
  out.second_derivative =
    select_lambda(problem.with_regularizer(Regularizer::second_derivative()), lambdas, options);
  out.gaussian =
    select_lambda(problem.with_regularizer(Regularizer::gaussian(gaussian_ref)), lambdas, options);
  out.kind = out.gaussian.min_sure() < out.second_derivative.min_sure()
               ? RegularizerKind::GaussianReference
               : RegularizerKind::SecondDerivative;
  out.lambda = out.chosen().chosen_lambda;
  return out;
}

int elbow_index(const std::vector<double>& x, const std::vector<double>& y)
{
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 3)
    return 0;
  double ymax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ymax = std::max(ymax, y[i]);
  if (!(ymax > 1e-20))
    return 0;
  const double floor = ymax * 1e-12;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(std::max(y[i], floor));
  }
  const auto [xlo, xhi] = std::minmax_element(lx.begin(), lx.end());
  const auto [ylo, yhi] = std::minmax_element(ly.begin(), ly.end());
  const double xr = *xhi - *xlo;
  const double yr = *yhi - *ylo;
  if (!(xr > 0) || !(yr > 1e-6))
    return 0;
  const double x0 = *xlo;
  const double y0 = *ylo;
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = (lx[i] - x0) / xr;
    ly[i] = (ly[i] - y0) / yr;
  }
  int best = 0;
  double best_k = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ax = lx[i] - lx[i - 1], ay = ly[i] - ly[i - 1];
    const double bx = lx[i + 1] - lx[i], by = ly[i + 1] - ly[i];
    const double cx = lx[i + 1] - lx[i - 1], cy = ly[i + 1] - ly[i - 1];
    const double denom = std::hypot(ax, ay) * std::hypot(bx, by) * std::hypot(cx, cy);
    if (!(denom > 0))
      continue;
    const double k = 2.0 * std::abs(ax * by - ay * bx) / denom;
    if (k > best_k) {
      best_k = k;
      best = static_cast<int>(i);
    }
  }
  return best;
}

ScreeCurve scree_curve(const DeconProblem& problem,
                       const std::vector<double>& lambdas,
                       const SelectionOptions& options)
{
  check_grid(lambdas);
  const std::size_t L = lambdas.size();
  ScreeCurve curve;
  curve.lambdas = lambdas;
  curve.q_values.assign(L, std::numeric_limits<double>::quiet_NaN());
  curve.err = curve.q_values;
  curve.regularizer = problem.regularizer.kind();

  const SupportRange range = problem.constraints.support_range();
  const Regularizer reg = problem.regularizer.restricted(range.a, range.b);
  parallel_for(static_cast<int>(L), options.threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    const DeconProblem p = problem.with_lambda(lambdas[k]);
    const QPSolution s = solve(p, options.solver);
    curve.q_values[k] = reg.penalty(s.fX.segment(range.a, range.size()));
    curve.err[k] = fit_error(p, s.fX);
  });
  curve.elbow_lambda = lambdas[static_cast<std::size_t>(elbow_index(lambdas, curve.q_values))];
  return curve;
}

} // namespace qpdecon
