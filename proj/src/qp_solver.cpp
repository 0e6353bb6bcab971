#include "qpdecon/qp_solver.hpp"

#include "qpdecon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpdecon {

const char* to_string(SolverStatus status)
{
  switch (status) {
    case SolverStatus::Optimal: return "Optimal";
    case SolverStatus::MaxIterations: return "MaxIterations";
    case SolverStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Factorization
{
  Eigen::MatrixXd H; // jittered
  Eigen::MatrixXd L;
};

Factorization factorize(const Eigen::MatrixXd& H, double jitter)
{
  const Eigen::Index n = H.rows();
  double scale = H.trace() / static_cast<double>(n);
  if (!(scale > 0))
    scale = 1.0;
  double ridge = jitter * scale;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd Hj = H;
    Hj.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(Hj);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      if (L.diagonal().minCoeff() > 0)
        return { std::move(Hj), std::move(L) };
    }
    ridge = ridge > 0 ? ridge * 10.0 : 1e-14 * scale;
  }
  throw DeconError(ErrorKind::SolverFailure, "quadratic term could not be factorized");
}

double violation(const QuadraticProgram& qp, const Eigen::VectorXd& x)
{
  double worst = 0.0;
  if (qp.E.rows() > 0)
    worst = (qp.E * x - qp.e).cwiseAbs().maxCoeff();
  if (qp.G.rows() > 0)
    worst = std::max(worst, std::max(0.0, (qp.h - qp.G * x).maxCoeff()));
  return worst;
}

void finish(const QuadraticProgram& qp, SolverResult& res)
{
  Eigen::VectorXd grad = qp.H * res.x + qp.g;
  if (qp.E.rows() > 0)
    grad -= qp.E.transpose() * res.eq_multipliers;
  if (qp.G.rows() > 0)
    grad -= qp.G.transpose() * res.ineq_multipliers;
  res.kkt_residual = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  res.objective = qp.objective(res.x);
  res.max_violation = violation(qp, res.x);
}

// Givens-based updates of the factors J and R, after Goldfarb & Idnani (1983)
// as organized in QuadProg++.
class ActiveSetState
{
public:
  ActiveSetState(const Eigen::MatrixXd& L, int n)
    : n_(n)
    , J_(L.transpose().triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(n, n)))
    , R_(Eigen::MatrixXd::Zero(n, n))
  {}

  const Eigen::MatrixXd& J() const { return J_; }
  int size() const { return iq_; }

  // z = J2 J2' np, r = R^{-1} J1' np
  void directions(const Eigen::VectorXd& np, Eigen::VectorXd& d, Eigen::VectorXd& z,
                  Eigen::VectorXd& r) const
  {
    d.noalias() = J_.transpose() * np;
    z.noalias() = J_.rightCols(n_ - iq_) * d.tail(n_ - iq_);
    r.resize(iq_);
    for (int i = iq_ - 1; i >= 0; --i) {
      double sum = d(i);
      for (int j = i + 1; j < iq_; ++j)
        sum -= R_(i, j) * r(j);
      r(i) = sum / R_(i, i);
    }
  }

  bool add(Eigen::VectorXd d)
  {
    for (int j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d(j - 1), ss = d(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0)
        continue;
      d(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d(j - 1) = -h;
      } else {
        d(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1), t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    for (int i = 0; i < iq_; ++i)
      R_(i, iq_ - 1) = d(i);
    if (std::abs(d(iq_ - 1)) <= kEps * r_norm_) {
      // linearly dependent on the active set; leave the column for the
      // caller to remove
      return false;
    }
    r_norm_ = std::max(r_norm_, std::abs(d(iq_ - 1)));
    return true;
  }

  // Removes the column at position `pos`, restoring triangularity of R.
  void remove(int pos)
  {
    for (int i = pos; i < iq_ - 1; ++i)
      R_.col(i) = R_.col(i + 1);
    R_.col(iq_ - 1).setZero();
    --iq_;
    for (int j = pos; j < iq_; ++j) {
      double cc = R_(j, j), ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0)
        continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k), t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j), t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

private:
  int n_;
  int iq_{ 0 };
  double r_norm_{ 1.0 };
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
};

// Stationarity-based solve of the equality-constrained problem on a working
// set: used to polish iterates of the splitting method.
bool polish(const QuadraticProgram& qp, const Eigen::MatrixXd& Hj,
            const std::vector<int>& working, SolverResult& res, double tol)
{
  const int n = qp.dim();
  const int me = static_cast<int>(qp.E.rows());
  const int mw = static_cast<int>(working.size());
  const int dim = n + me + mw;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs(dim);
  K.topLeftCorner(n, n) = Hj;
  rhs.head(n) = -qp.g;
  for (int i = 0; i < me; ++i) {
    K.block(0, n + i, n, 1) = -qp.E.row(i).transpose();
    K.block(n + i, 0, 1, n) = qp.E.row(i);
    rhs(n + i) = qp.e(i);
  }
  for (int k = 0; k < mw; ++k) {
    const int r = working[static_cast<std::size_t>(k)];
    K.block(0, n + me + k, n, 1) = -qp.G.row(r).transpose();
    K.block(n + me + k, 0, 1, n) = qp.G.row(r);
    rhs(n + me + k) = qp.h(r);
  }
  const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
  if (!sol.allFinite())
    return false;
  SolverResult cand = res;
  cand.x = sol.head(n);
  cand.eq_multipliers = sol.segment(me > 0 ? n : 0, me);
  cand.ineq_multipliers.setZero();
  for (int k = 0; k < mw; ++k)
    cand.ineq_multipliers(working[static_cast<std::size_t>(k)]) = sol(n + me + k);
  if (violation(qp, cand.x) > tol)
    return false;
  if (mw > 0 && cand.ineq_multipliers.minCoeff() < -1e-8 * (1.0 + sol.cwiseAbs().maxCoeff()))
    return false;
  cand.ineq_multipliers = cand.ineq_multipliers.cwiseMax(0.0);
  cand.active = working;
  res = std::move(cand);
  return true;
}

SolverResult admm(const QuadraticProgram& qp, const Eigen::MatrixXd& Hj,
                  const SolverOptions& opt)
{
  const int n = qp.dim();
  const int me = static_cast<int>(qp.E.rows());
  const int mi = static_cast<int>(qp.G.rows());
  const int m = me + mi;
  Eigen::MatrixXd A(m, n);
  Eigen::VectorXd lo(m), hi(m), rho(m);
  if (me > 0) {
    A.topRows(me) = qp.E;
    lo.head(me) = qp.e;
    hi.head(me) = qp.e;
  }
  if (mi > 0) {
    A.bottomRows(mi) = qp.G;
    lo.tail(mi) = qp.h;
    hi.tail(mi).setConstant(kInf);
  }
  const double base_rho = 0.1 * std::max(1e-6, Hj.diagonal().mean());
  for (int i = 0; i < m; ++i)
    rho(i) = i < me ? 1e3 * base_rho : base_rho;
  const double sigma = 1e-6 * std::max(1e-6, Hj.diagonal().mean());
  const double alpha = 1.6;

  Eigen::MatrixXd KKT = Hj;
  KKT.diagonal().array() += sigma;
  KKT.noalias() += A.transpose() * rho.asDiagonal() * A;
  Eigen::LLT<Eigen::MatrixXd> llt(KKT);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n), z = Eigen::VectorXd::Zero(m),
                  y = Eigen::VectorXd::Zero(m);
  SolverResult res;
  res.used_fallback = true;
  res.status = SolverStatus::MaxIterations;
  int it = 0;
  for (; it < opt.fallback_iterations; ++it) {
    const Eigen::VectorXd rhs =
      sigma * x - qp.g + A.transpose() * (rho.cwiseProduct(z) - y);
    const Eigen::VectorXd xt = llt.solve(rhs);
    const Eigen::VectorXd zt = A * xt;
    const Eigen::VectorXd xn = alpha * xt + (1 - alpha) * x;
    const Eigen::VectorXd zrelax = alpha * zt + (1 - alpha) * z;
    Eigen::VectorXd zn = (zrelax + y.cwiseQuotient(rho)).cwiseMax(lo).cwiseMin(hi);
    y += rho.cwiseProduct(zrelax - zn);
    const double prim = (A * xn - zn).cwiseAbs().maxCoeff();
    const double dual = (rho.cwiseProduct(zn - z)).cwiseAbs().maxCoeff();
    x = xn;
    z = zn;
    if (prim < 1e-12 && dual < 1e-12) {
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.x = x;
  res.eq_multipliers = me > 0 ? Eigen::VectorXd(-y.head(me)) : Eigen::VectorXd();
  res.ineq_multipliers =
    mi > 0 ? Eigen::VectorXd((-y.tail(mi)).cwiseMax(0.0)) : Eigen::VectorXd();

  std::vector<int> working;
  for (int i = 0; i < mi; ++i)
    if (-y(me + i) > 0.0 && std::abs(z(me + i) - lo(me + i)) <= 1e-8 * (1 + std::abs(lo(me + i))))
      working.push_back(i);
  if (polish(qp, Hj, working, res, opt.feasibility_tol))
    res.status = SolverStatus::Optimal;
  else if (violation(qp, res.x) <= opt.feasibility_tol)
    res.status = SolverStatus::Optimal;
  return res;
}

} // namespace

SolverResult solve_qp(const QuadraticProgram& qp, const SolverOptions& opt)
{
  const int n = qp.dim();
  const int me = static_cast<int>(qp.E.rows());
  const int mi = static_cast<int>(qp.G.rows());
  if (qp.H.cols() != n || qp.g.size() != n || (me > 0 && qp.E.cols() != n) ||
      qp.e.size() != me || (mi > 0 && qp.G.cols() != n) || qp.h.size() != mi)
    throw DeconError(ErrorKind::DimensionMismatch, "inconsistent QP dimensions");

  const Factorization fac = factorize(qp.H, opt.jitter);
  const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : 50 * n;

  auto fallback = [&](int spent) {
    SolverResult r = admm(qp, fac.H, opt);
    r.iterations += spent;
    finish(qp, r);
    return r;
  };
  if (opt.force_fallback)
    return fallback(0);

  ActiveSetState state(fac.L, n);
  const Eigen::MatrixXd& J = state.J();

  SolverResult res;
  res.x = -(J * (J.transpose() * qp.g));
  res.eq_multipliers = Eigen::VectorXd::Zero(me);
  res.ineq_multipliers = Eigen::VectorXd::Zero(mi);

  // Positions 0..me-1 of `active`/`u` hold equality rows (as -1 - i),
  // the rest hold inequality row indices.
  std::vector<int> active;
  std::vector<double> u;
  active.reserve(static_cast<std::size_t>(n + 1));
  u.reserve(static_cast<std::size_t>(n + 1));
  Eigen::VectorXd d(n), z(n), r;

  for (int i = 0; i < me; ++i) {
    const Eigen::VectorXd np = qp.E.row(i).transpose();
    state.directions(np, d, z, r);
    const double zn = z.dot(np);
    if (!(std::abs(zn) > kEps * (1.0 + np.squaredNorm()))) {
      res.status = SolverStatus::Infeasible;
      finish(qp, res);
      return res;
    }
    const double t2 = (qp.e(i) - np.dot(res.x)) / zn;
    res.x += t2 * z;
    for (int k = 0; k < state.size(); ++k)
      u[static_cast<std::size_t>(k)] -= t2 * r(k);
    u.push_back(t2);
    active.push_back(-1 - i);
    if (!state.add(d)) {
      res.status = SolverStatus::Infeasible;
      finish(qp, res);
      return res;
    }
  }

  Eigen::VectorXd row_norm(mi);
  for (int i = 0; i < mi; ++i)
    row_norm(i) = qp.G.row(i).norm();
  std::vector<char> in_active(static_cast<std::size_t>(mi), 0);
  std::vector<char> excluded(static_cast<std::size_t>(mi), 0);
  Eigen::VectorXd s(mi);

  auto threshold = [&](int i) {
    const double scale = 1.0 + res.x.cwiseAbs().maxCoeff();
    return 1e-13 * scale * (row_norm(i) + std::abs(qp.h(i)));
  };

  int iter = 0;
  bool done = false;
  while (!done) {
    // step 1: slacks at the current point
    std::fill(excluded.begin(), excluded.end(), 0);
    for (int i = 0; i < mi; ++i)
      s(i) = qp.G.row(i).dot(res.x) - qp.h(i);
    const Eigen::VectorXd x_old = res.x;
    const std::vector<int> active_old = active;
    const std::vector<double> u_old = u;

    bool restart = true;
    while (restart) {
      restart = false;
      // step 2: pick the most violated row, lowest index on ties
      int ip = -1;
      double worst = 0.0;
      for (int i = 0; i < mi; ++i) {
        if (in_active[static_cast<std::size_t>(i)] || excluded[static_cast<std::size_t>(i)])
          continue;
        if (s(i) < -threshold(i) && s(i) < worst) {
          worst = s(i);
          ip = i;
        }
      }
      if (ip < 0) {
        done = true;
        break;
      }
      const Eigen::VectorXd np = qp.G.row(ip).transpose();
      u.push_back(0.0);
      active.push_back(ip);

      for (;;) {
        if (++iter > max_iter)
          return fallback(iter);
        state.directions(np, d, z, r);
        // dual (partial) step length over active inequality rows
        int drop_pos = -1;
        double t1 = kInf;
        for (int k = me; k < state.size(); ++k) {
          if (r(k) > 0.0) {
            const double t = u[static_cast<std::size_t>(k)] / r(k);
            if (t < t1) {
              t1 = t;
              drop_pos = k;
            }
          }
        }
        double t2 = kInf;
        const double zn = z.dot(np);
        if (z.squaredNorm() > kEps * kEps * (1.0 + np.squaredNorm()) && zn > 0.0)
          t2 = std::max(0.0, -s(ip) / zn);
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          res.status = SolverStatus::Infeasible;
          res.iterations = iter;
          finish(qp, res);
          return res;
        }
        for (int k = 0; k < state.size(); ++k)
          u[static_cast<std::size_t>(k)] -= t * r(k);
        u.back() += t;
        if (!std::isfinite(t2)) {
          // pure dual step: drop the blocking row and retry
          const int l = active[static_cast<std::size_t>(drop_pos)];
          in_active[static_cast<std::size_t>(l)] = 0;
          active.erase(active.begin() + drop_pos);
          u.erase(u.begin() + drop_pos);
          state.remove(drop_pos);
          continue;
        }
        res.x += t * z;
        if (t == t2) {
          if (!state.add(d)) {
            // dependent: undo this major step and exclude ip for now
            state.remove(state.size() - 1);
            excluded[static_cast<std::size_t>(ip)] = 1;
            for (int k : active)
              if (k >= 0)
                in_active[static_cast<std::size_t>(k)] = 0;
            // rebuild the factorization for the saved working set
            state = ActiveSetState(fac.L, n);
            active.clear();
            u.clear();
            for (std::size_t k = 0; k < active_old.size(); ++k) {
              const int row = active_old[k];
              const Eigen::VectorXd nk =
                row < 0 ? Eigen::VectorXd(qp.E.row(-1 - row).transpose())
                        : Eigen::VectorXd(qp.G.row(row).transpose());
              state.directions(nk, d, z, r);
              state.add(d);
              active.push_back(row);
              u.push_back(u_old[k]);
              if (row >= 0)
                in_active[static_cast<std::size_t>(row)] = 1;
            }
            res.x = x_old;
            for (int i = 0; i < mi; ++i)
              s(i) = qp.G.row(i).dot(res.x) - qp.h(i);
            restart = true;
            break;
          }
          in_active[static_cast<std::size_t>(ip)] = 1;
          break; // back to step 1
        }
        // partial step: drop the blocking row, keep working on ip
        const int l = active[static_cast<std::size_t>(drop_pos)];
        in_active[static_cast<std::size_t>(l)] = 0;
        active.erase(active.begin() + drop_pos);
        u.erase(u.begin() + drop_pos);
        state.remove(drop_pos);
        s(ip) = np.dot(res.x) - qp.h(ip);
      }
    }
  }

  res.iterations = iter;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const int row = active[k];
    if (row < 0)
      res.eq_multipliers(-1 - row) = u[k];
    else {
      res.ineq_multipliers(row) = u[k];
      res.active.push_back(row);
    }
  }
  std::sort(res.active.begin(), res.active.end());
  finish(qp, res);
  if (res.max_violation > opt.feasibility_tol) {
    SolverResult polished = res;
    if (polish(qp, fac.H, res.active, polished, opt.feasibility_tol)) {
      finish(qp, polished);
      return polished;
    }
    res.status = SolverStatus::MaxIterations;
  }
  return res;
}

} // namespace qpdecon
