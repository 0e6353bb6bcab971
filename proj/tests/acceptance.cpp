// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "oracles.hpp"

#include "qpdecon/estimator.hpp"
#include "qpdecon/parallel.hpp"
#include "qpdecon/selection.hpp"
#include "qpdecon/simlab.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace qpdecon;

namespace {

int failures = 0;
// Largest constraint violation of any fitted density seen in the run.
double worst_violation = 0.0;
long fits_checked = 0;

void record_fit(const ConstraintSet& set, const Eigen::VectorXd& f, std::optional<int> mode = std::nullopt)
{
  worst_violation = std::max(worst_violation, max_violation(set, f, mode));
  ++fits_checked;
}

void report(int id, bool pass, const std::string& what, const std::string& detail, double seconds)
{
  std::printf("%s criterion %d: %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str(),
              seconds);
  std::fflush(stdout);
  if (!pass)
    ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Histogram and problem on the gamma example's range with Gaussian noise.
DeconProblem random_instance(int K, double lambda, RegularizerKind kind, std::mt19937_64& rng)
{
  const Grid grid(-5.0, 18.0, K);
  const NoiseModel noise = NoiseModel::gaussian(3.2);
  HistogramDensity fY = oracle::random_histogram(grid, 5000, rng);
  Regularizer reg = Regularizer::second_derivative();
  if (kind == RegularizerKind::GaussianReference) {
    Eigen::VectorXd ref(K);
    for (int j = 0; j < K; ++j) {
      const double x = grid.point(j) - 5.0;
      ref(j) = std::exp(-0.5 * x * x / 5.0) / std::sqrt(2 * M_PI * 5.0);
    }
    reg = Regularizer::gaussian(ref);
  }
  return DeconProblem{ convolution_matrix(grid, noise), std::move(fY), ConstraintSet::basic(K, grid.delta()),
                       reg, lambda };
}

void criterion_closed_form()
{
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const int Ks[] = { 10, 50, 200 };
  const double lambdas[] = { 1e-4, 1e-2, 1.0 };
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const RegularizerKind kind = t % 2 ? RegularizerKind::GaussianReference : RegularizerKind::SecondDerivative;
    const DeconProblem p = random_instance(Ks[t % 3], lambdas[(t / 3) % 3], kind, rng).equality_only();
    const Eigen::VectorXd a = closed_form_equality(p).apply(p.fY.heights);
    const QPSolution s = solve(p);
    record_fit(p.constraints, s.fX);
    worst = std::max(worst, (a - s.fX).lpNorm<Eigen::Infinity>() / s.fX.lpNorm<Eigen::Infinity>());
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-6 && secs < 30, "closed form equals equality-only solve",
         "max relative sup error " + fmt(worst) + ", limit 1e-6", secs);
}

void criterion_enumeration()
{
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  double worst = 0.0;
  int unmatched = 0;
  for (int t = 0; t < 100; ++t) {
    // shape rows on top of nonnegativity, at most 12 inequality rows in total
    const int K = t % 4 == 2 ? 4 + t % 3 : 4 + t % 5;
    const RegularizerKind kind = t % 2 ? RegularizerKind::GaussianReference : RegularizerKind::SecondDerivative;
    DeconProblem p = oracle::gaussian_problem(K, 0.5 + 0.1 * (t % 7), 0.01 * (t % 3), kind, rng);
    switch (t % 4) {
      case 0:
        p.constraints.monotone_right_from = K / 2;
        break;
      case 1:
        p.constraints.convex_right_from = K - 3;
        p.constraints.monotone_left_until = 2;
        break;
      case 2:
        p.constraints.mode_kind = ModeKind::Known;
        p.constraints.mode_index = K / 2;
        break;
      default:
        p.constraints.support = make_support(K, 1, K - 1);
        p.constraints.monotone_right_from = K / 2;
        break;
    }
    const AssembledProblem a = assemble(p);
    if (a.qp.G.rows() > 12) {
      ++unmatched;
      continue;
    }
    const auto best = oracle::enumerate_active_sets(a.qp);
    const QPSolution s = solve(p);
    record_fit(p.constraints, s.fX);
    if (!best) {
      ++unmatched;
      continue;
    }
    const double target = *best + a.constant;
    worst = std::max(worst, std::abs(s.objective - target) / std::max(1.0, std::abs(target)));
  }
  const double secs = seconds_since(t0);
  report(2, unmatched == 0 && worst <= 1e-8 && secs < 60, "solver matches active-set enumeration",
         "max objective gap " + fmt(worst) + ", limit 1e-8, " + std::to_string(unmatched) + " unmatched",
         secs);
}

void criterion_covariance_penalty()
{
  const auto t0 = std::chrono::steady_clock::now();
  const int K = 20;
  const long n = 200;
  const int reps = 10000;
  const Grid grid(0.0, K - 1.0, K);
  const Eigen::MatrixXd C = convolution_matrix(grid, NoiseModel::gaussian(2.0)).entries;
  std::vector<double> p(K);
  for (int j = 0; j < K; ++j)
    p[j] = std::exp(-0.5 * (j - 9.5) * (j - 9.5) / 6.0);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p)
    v /= total;
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), K);
  const double d = grid.delta();
  const Eigen::MatrixXd Sigma =
    (Eigen::MatrixXd(pv.asDiagonal()) - pv * pv.transpose()) / (static_cast<double>(n) * d * d);

  std::mt19937_64 rng(303);
  std::discrete_distribution<int> draw(p.begin(), p.end());
  auto sample = [&] {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(K);
    for (long i = 0; i < n; ++i)
      h(draw(rng)) += 1.0;
    return Eigen::VectorXd(h / (static_cast<double>(n) * d));
  };

  bool pass = true;
  std::ostringstream detail;
  for (double lambda : { 1e-3, 1e-1 }) {
    const ClosedFormSolution cf =
      closed_form_equality(C, d, lambda, Regularizer::second_derivative(), std::nullopt);
    const double expected = 2.0 * (C * cf.B * Sigma).trace();
    double gap = 0.0;
    for (int r = 0; r < reps; ++r) {
      const Eigen::VectorXd train = sample();
      const Eigen::VectorXd test = sample();
      const Eigen::VectorXd fit = C * cf.apply(train);
      gap += (test - fit).squaredNorm() - (train - fit).squaredNorm();
    }
    gap /= reps;
    const double rel = std::abs(gap - expected) / std::abs(expected);
    pass = pass && rel <= 0.15;
    detail << "lambda " << lambda << ": MC " << fmt(gap) << " vs " << fmt(expected) << " (rel " << fmt(rel)
           << ") ";
  }
  const double secs = seconds_since(t0);
  report(3, pass && secs < 300, "covariance penalty identity", detail.str() + "limit 0.15", secs);
}

SimulationSpec desk_spec(const std::string& truth)
{
  SimulationSpec spec;
  spec.truth = Distribution::parse(truth);
  spec.noise = NoiseModel::gaussian(3.2);
  spec.n = 5000;
  spec.reps = 100;
  spec.seed = 42;
  spec.threads = default_thread_count();
  return spec;
}

std::size_t prob_index(const std::vector<double>& probs, double p)
{
  return static_cast<std::size_t>(std::find(probs.begin(), probs.end(), p) - probs.begin());
}

void record_report(const SimulationReport& r)
{
  for (const auto& m : r.methods) {
    worst_violation = std::max(worst_violation, m.max_violation);
    fits_checked += static_cast<long>(m.l1.size()) - m.failures;
  }
}

void criterion_gamma_ordering()
{
  const auto t0 = std::chrono::steady_clock::now();
  SimulationSpec spec = desk_spec("gamma:5,1");
  spec.methods = { MethodSpec::parse("qp-in@0.011", spec.truth), MethodSpec::parse("kd-rect@0.867", spec.truth) };
  const SimulationReport r = run_simulation(spec);
  record_report(r);
  bool pass = r.methods[0].failures == 0 && r.methods[1].failures == 0;
  std::ostringstream detail;
  for (double p : { 0.95, 0.99 }) {
    const std::size_t i = prob_index(r.probabilities, p);
    const double ratio = r.methods[0].mae[i] / r.methods[1].mae[i];
    pass = pass && ratio <= 0.5;
    detail << "p=" << p << ": " << fmt(1e3 * r.methods[0].mae[i]) << "/" << fmt(1e3 * r.methods[1].mae[i])
           << " = " << fmt(ratio) << " ";
  }
  const double secs = seconds_since(t0);
  report(4, pass && secs < 1800, "gamma example: QP_in MAE at most half of KD_rect at p=0.95, 0.99",
         detail.str() + "limit 0.5", secs);
}

void criterion_exponential_gain()
{
  const auto t0 = std::chrono::steady_clock::now();
  SimulationSpec spec = desk_spec("exp:0.447");
  spec.methods = { MethodSpec::parse("qp-incms@0.316", spec.truth),
                   MethodSpec::parse("qp-in@0.00995", spec.truth) };
  const SimulationReport r = run_simulation(spec);
  record_report(r);
  bool pass = r.methods[0].failures == 0 && r.methods[1].failures == 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
    if (r.probabilities[i] < 0.25)
      continue;
    worst = std::max(worst, r.methods[0].mae[i] / r.methods[1].mae[i]);
  }
  pass = pass && worst <= 0.6;
  const double secs = seconds_since(t0);
  report(5, pass && secs < 1800, "exponential example: QP_incms MAE at most 0.6 of QP_in for p >= 0.25",
         "largest ratio " + fmt(worst) + ", limit 0.6", secs);
}

void criterion_sure_sanity()
{
  const auto t0 = std::chrono::steady_clock::now();
  SimulationSpec spec = desk_spec("gamma:5,1");
  spec.methods = { MethodSpec::parse("qp-in@sure", spec.truth) };
  const SimulationReport r = run_simulation(spec);
  record_report(r);
  const MethodReport& m = r.methods[0];
  const double med = m.lambda_summary ? m.lambda_summary->median : std::nan("");
  const bool pass = m.failures == 0 && med >= 0.002 && med <= 0.05 && m.l1_outlier_fraction <= 0.15;
  report(6, pass, "SURE lambda median and L1 outliers on the gamma example",
         "median lambda " + fmt(med) + " in [0.002, 0.05], outlier fraction " + fmt(m.l1_outlier_fraction) +
           " <= 0.15",
         seconds_since(t0));
}

void criterion_scree_monotone()
{
  const auto t0 = std::chrono::steady_clock::now();
  double worst_q = 0.0, worst_err = 0.0;
  int curves = 0;
  auto check = [&](const ScreeCurve& c) {
    for (std::size_t i = 0; i + 1 < c.lambdas.size(); ++i) {
      worst_q = std::max(worst_q, c.q_values[i + 1] - c.q_values[i]);
      worst_err = std::max(worst_err, c.err[i] - c.err[i + 1]);
    }
    ++curves;
  };
  SelectionOptions sel;
  sel.threads = default_thread_count();
  for (const char* truth : { "gamma:5,1", "exp:0.447" }) {
    SimulationSpec spec = desk_spec(truth);
    spec.n = 1000;
    const char* methods[] = { "qp-in", "qp-incms", "qp-incm" };
    for (int rep = 0; rep < 2; ++rep) {
      const std::vector<double> y = simulate_observations(spec, rep);
      for (const char* name : methods) {
        const MethodSpec method = MethodSpec::parse(name, spec.truth);
        FitOptions o;
        o.constraints = method.constraints;
        Eigen::VectorXd ref;
        DeconProblem p = build_problem(y, spec.noise, o, &ref);
        for (RegularizerKind kind : { RegularizerKind::SecondDerivative, RegularizerKind::GaussianReference }) {
          p.regularizer = kind == RegularizerKind::SecondDerivative ? Regularizer::second_derivative()
                                                                    : Regularizer::gaussian(ref);
          check(scree_curve(p, default_lambda_grid(), sel));
          record_fit(p.constraints, solve(p.with_lambda(0.01)).fX);
        }
      }
    }
  }
  const bool pass = worst_q <= 1e-9 && worst_err <= 1e-9;
  report(7, pass, "scree curves are monotone",
         std::to_string(curves) + " curves, largest Q increase " + fmt(worst_q) + ", largest err decrease " +
           fmt(worst_err) + ", limit 1e-9",
         seconds_since(t0));
}

void criterion_feasibility()
{
  report(8, worst_violation <= 1e-8, "every fit satisfies its constraints",
         std::to_string(fits_checked) + " fits, largest violation " + fmt(worst_violation) + ", limit 1e-8", 0.0);
}

void criterion_true_quantile()
{
  const auto t0 = std::chrono::steady_clock::now();
  double lo = 0.0, hi = 50.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (boost::math::gamma_p(5.0, mid) < 0.5 ? lo : hi) = mid;
  }
  const double reference = 0.5 * (lo + hi);
  const double q = true_quantile(Distribution::parse("gamma:5,1"), 0.5);
  const bool pass = std::abs(q - 4.6709) <= 1e-3 && std::abs(q - reference) <= 1e-3;
  std::ostringstream detail;
  detail.precision(10);
  detail << "true_quantile " << q << ", bisection " << reference << ", target 4.6709 +- 1e-3";
  report(9, pass, "gamma median", detail.str(), seconds_since(t0));
}

} // namespace

int main()
{
  criterion_closed_form();
  criterion_enumeration();
  criterion_covariance_penalty();
  criterion_gamma_ordering();
  criterion_exponential_gain();
  criterion_sure_sanity();
  criterion_scree_monotone();
  criterion_feasibility();
  criterion_true_quantile();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
