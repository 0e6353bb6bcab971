#include "qpdecon/qp_core.hpp"

#include "qpdecon/error.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace qpdecon {

DeconProblem DeconProblem::equality_only() const
{
  DeconProblem p = *this;
  ConstraintSet c = ConstraintSet::basic(constraints.K, constraints.delta);
  c.nonneg = false;
  c.support = constraints.support;
  p.constraints = c;
  return p;
}

DeconProblem DeconProblem::with_lambda(double value) const
{
  DeconProblem p = *this;
  p.lambda = value;
  return p;
}

DeconProblem DeconProblem::with_regularizer(Regularizer reg) const
{
  DeconProblem p = *this;
  p.regularizer = std::move(reg);
  return p;
}

AssembledProblem assemble(const DeconProblem& problem, std::optional<int> mode)
{
  const int K = problem.constraints.K;
  if (problem.C.entries.rows() != problem.fY.heights.size() ||
      problem.C.entries.cols() != K)
    throw DeconError(ErrorKind::DimensionMismatch,
                     "convolution matrix, histogram and constraints disagree on K");
  if (!(problem.lambda >= 0.0))
    throw DeconError(ErrorKind::InvalidSpec, "lambda must be nonnegative");

  const SupportRange range = problem.constraints.support_range();
  const int m = range.size();
  const Eigen::MatrixXd C = apply_support(problem.C.entries, range);
  const Regularizer reg = problem.regularizer.restricted(range.a, range.b);
  const Eigen::VectorXd target = reg.target(m);
  const double lambda = problem.lambda;

  AssembledProblem out;
  out.range = range;
  auto& qp = out.qp;
  qp.H = 2.0 * (C.transpose() * C + lambda * reg.quadratic(m));
  qp.g = -2.0 * (C.transpose() * problem.fY.heights) - 2.0 * lambda * target;
  qp.E = Eigen::MatrixXd::Constant(1, m, problem.constraints.delta);
  qp.e = Eigen::VectorXd::Ones(1);

  std::vector<Eigen::MatrixXd> blocks;
  if (problem.constraints.nonneg)
    blocks.push_back(Eigen::MatrixXd::Identity(m, m));
  const bool search = problem.constraints.mode_kind == ModeKind::Search;
  if (!search || mode) {
    const Eigen::MatrixXd shape = problem.constraints.shape_rows(mode);
    if (shape.rows() > 0)
      blocks.push_back(restrict_rows(shape, range));
  }
  Eigen::Index rows = 0;
  for (const auto& b : blocks)
    rows += b.rows();
  qp.G.resize(rows, m);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    qp.G.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  qp.h = Eigen::VectorXd::Zero(rows);
  out.constant = problem.fY.heights.squaredNorm() + lambda * target.squaredNorm();
  return out;
}

double fit_error(const DeconProblem& problem, const Eigen::VectorXd& fX)
{
  return (problem.fY.heights - problem.C.entries * fX).squaredNorm();
}

double deconvolution_objective(const DeconProblem& problem, const Eigen::VectorXd& fX)
{
  const SupportRange range = problem.constraints.support_range();
  const Regularizer reg = problem.regularizer.restricted(range.a, range.b);
  const Eigen::VectorXd kept = fX.segment(range.a, range.size());
  return fit_error(problem, fX) + problem.lambda * reg.penalty(kept);
}

namespace {

QPSolution solve_single(const DeconProblem& problem, std::optional<int> mode,
                        const SolverOptions& options)
{
  const AssembledProblem a = assemble(problem, mode);
  const SolverResult r = solve_qp(a.qp, options);
  if (r.status == SolverStatus::Infeasible)
    throw DeconError(ErrorKind::Infeasible,
                     "constraint set " + problem.constraints.describe() +
                       " admits no density");
  QPSolution s;
  s.fX = Eigen::VectorXd::Zero(problem.constraints.K);
  s.fX.segment(a.range.a, a.range.size()) = r.x;
  s.objective = deconvolution_objective(problem, s.fX);
  s.kkt_residual = r.kkt_residual;
  s.iterations = r.iterations;
  s.status = r.status;
  s.mode_index = mode;
  return s;
}

} // namespace

QPSolution solve(const DeconProblem& problem, const SolverOptions& options)
{
  if (problem.constraints.mode_kind == ModeKind::Search)
    return mode_search_solve(problem, {}, options);
  std::optional<int> mode;
  if (problem.constraints.mode_kind == ModeKind::Known)
    mode = problem.constraints.mode_index;
  return solve_single(problem, mode, options);
}

QPSolution mode_search_solve(const DeconProblem& problem,
                             std::span<const int> candidates,
                             const SolverOptions& options)
{
  std::vector<int> modes(candidates.begin(), candidates.end());
  if (modes.empty()) {
    const SupportRange range = problem.constraints.support_range();
    modes.resize(static_cast<std::size_t>(range.size()));
    std::iota(modes.begin(), modes.end(), range.a);
  }
  Eigen::Index peak = 0;
  problem.fY.heights.maxCoeff(&peak);

  std::optional<QPSolution> best;
  for (int mode : modes) {
    QPSolution s;
    try {
      s = solve_single(problem, mode, options);
    } catch (const DeconError& e) {
      if (e.kind() == ErrorKind::Infeasible)
        continue;
      throw;
    }
    if (!best) {
      best = std::move(s);
      continue;
    }
    const double tie = 1e-12 * (1.0 + std::abs(best->objective));
    if (s.objective < best->objective - tie) {
      best = std::move(s);
    } else if (std::abs(s.objective - best->objective) <= tie &&
               std::abs(mode - peak) < std::abs(*best->mode_index - peak)) {
      best = std::move(s);
    }
  }
  if (!best)
    throw DeconError(ErrorKind::Infeasible, "no candidate mode admits a density");
  return *best;
}

} // namespace qpdecon
