#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qpdecon {

//! Dense convex QP
//!
//!   minimize    1/2 x'Hx + g'x
//!   subject to  E x  = e
//!               G x >= h
//!
//! H must be symmetric positive semidefinite; a small ridge is added to the
//! factorization when it is singular or nearly so.
struct QuadraticProgram
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  int dim() const { return static_cast<int>(H.rows()); }
  double objective(const Eigen::VectorXd& x) const
  {
    return 0.5 * x.dot(H * x) + g.dot(x);
  }
};

enum class SolverStatus
{
  Optimal,
  MaxIterations,
  Infeasible
};

const char* to_string(SolverStatus status);

struct SolverOptions
{
  //! Ridge added to H for factorization, relative to trace(H)/n.
  double jitter = 1e-12;
  //! Iteration cap for the active-set phase; 0 means 50 * n.
  int max_iterations = 0;
  //! Constraint violation tolerance on the returned point.
  double feasibility_tol = 1e-9;
  //! Skip the active-set phase and go straight to the splitting iteration.
  bool force_fallback = false;
  int fallback_iterations = 200000;
};

struct SolverResult
{
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  //! One entry per inequality row; zero for inactive rows.
  Eigen::VectorXd ineq_multipliers;
  std::vector<int> active;
  //! Objective with the unjittered H.
  double objective{ 0 };
  //! Stationarity residual ||Hx + g - E'mu - G'y||_inf.
  double kkt_residual{ 0 };
  //! Largest constraint violation at x.
  double max_violation{ 0 };
  int iterations{ 0 };
  bool used_fallback{ false };
  SolverStatus status{ SolverStatus::Optimal };
};

//! Goldfarb-Idnani dual active-set method. The first iterate is the
//! unconstrained minimizer, the equality rows are added next, then the most
//! violated inequality is brought in at each major step (lowest index on
//! ties). When the iteration cap is reached the problem is handed to an
//! ADMM splitting iteration followed by an active-set polish.
SolverResult solve_qp(const QuadraticProgram& qp, const SolverOptions& options = {});

} // namespace qpdecon
