#pragma once

#include "qpdecon/constraints.hpp"
#include "qpdecon/discretize.hpp"
#include "qpdecon/qp_solver.hpp"
#include "qpdecon/regularization.hpp"

#include <Eigen/Dense>
#include <optional>
#include <span>

namespace qpdecon {

//! Everything the penalized least-squares deconvolution needs:
//!   minimize ||fY - C f||^2 + lambda Q(f)  subject to the constraint set.
struct DeconProblem
{
  ConvolutionMatrix C;
  HistogramDensity fY;
  ConstraintSet constraints;
  Regularizer regularizer;
  double lambda{ 0.0 };

  //! Same problem keeping only integrate-to-one (and the support reduction).
  DeconProblem equality_only() const;
  DeconProblem with_lambda(double value) const;
  DeconProblem with_regularizer(Regularizer reg) const;
};

//! Problem in solver form over the support columns.
struct AssembledProblem
{
  QuadraticProgram qp;
  SupportRange range;
  //! ||fY||^2 (+ lambda ||f_reg||^2); objective = qp.objective(x) + constant.
  double constant{ 0.0 };
};

AssembledProblem assemble(const DeconProblem& problem,
                          std::optional<int> mode = std::nullopt);

struct QPSolution
{
  //! Full-length density (zeros outside the support).
  Eigen::VectorXd fX;
  double objective{ 0.0 };
  double kkt_residual{ 0.0 };
  int iterations{ 0 };
  SolverStatus status{ SolverStatus::Optimal };
  std::optional<int> mode_index;
};

//! Data misfit ||fY - C f||^2.
double fit_error(const DeconProblem& problem, const Eigen::VectorXd& fX);

//! Objective ||fY - C f||^2 + lambda Q(f) on a full-length vector.
double deconvolution_objective(const DeconProblem& problem, const Eigen::VectorXd& fX);

//! Solves the problem; an unknown mode is resolved by `mode_search_solve`.
//! Throws DeconError(Infeasible) for contradictory constraints. An iteration
//! cap hit is reported through `status` with the best iterate.
QPSolution solve(const DeconProblem& problem, const SolverOptions& options = {});

//! Solves one QP per candidate mode and keeps the smallest objective; ties
//! go to the candidate nearest the histogram's argmax. Empty `candidates`
//! means every index of the support.
QPSolution mode_search_solve(const DeconProblem& problem,
                             std::span<const int> candidates = {},
                             const SolverOptions& options = {});

} // namespace qpdecon
