#include "oracles.hpp"

#include "qpdecon/distributions.hpp"
#include "qpdecon/error.hpp"
#include "qpdecon/estimator.hpp"
#include "qpdecon/selection.hpp"

#include <doctest.h>

#include <random>

using namespace qpdecon;

namespace {

double rel_sup(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(1e-300, b.lpNorm<Eigen::Infinity>());
}

} // namespace

TEST_CASE("closed form with C = I and no penalty")
{
  const int K = 6;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
  const ClosedFormSolution cf =
    closed_form_equality(I, 1.0, 0.0, Regularizer::gaussian(Eigen::VectorXd::Zero(K)), std::nullopt, 0.0);
  const Eigen::MatrixXd expect = I - Eigen::MatrixXd::Constant(K, K, 1.0 / K);
  CHECK((cf.B - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((cf.b.array() - 1.0 / K).abs().maxCoeff() < 1e-14);

  Eigen::VectorXd fY(K);
  fY << 0.1, 0.3, 0.05, 0.25, 0.2, 0.1;
  CHECK((cf.apply(fY) - fY).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("closed form shrinks to the projected reference")
{
  const int K = 5;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
  Eigen::VectorXd ref(K);
  ref << 0.05, 0.2, 0.4, 0.2, 0.05;
  const Regularizer g = Regularizer::gaussian(ref);
  const ClosedFormSolution at0 = closed_form_equality(I, 1.0, 0.0, g);
  const ClosedFormSolution big = closed_form_equality(I, 1.0, 1e8, g);
  CHECK(big.B.norm() <= 1e-6 * at0.B.norm());
  CHECK((big.b - (ref.array() + 0.02).matrix()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("closed form equals the equality-only QP")
{
  std::mt19937_64 rng(31);
  for (int t = 0; t < 12; ++t) {
    const int K = t % 2 ? 12 : 40;
    const auto kind = t % 3 ? RegularizerKind::GaussianReference : RegularizerKind::SecondDerivative;
    const double lambda = std::pow(10.0, -4.0 + 2.0 * (t % 3));
    DeconProblem p = oracle::gaussian_problem(K, 2.0, lambda, kind, rng).equality_only();
    if (t % 4 == 3)
      p.constraints.support = make_support(K, 2, K - 3);
    const ClosedFormSolution cf = closed_form_equality(p);
    const Eigen::VectorXd x = cf.apply(p.fY.heights);
    const QPSolution s = solve(p);
    CHECK(rel_sup(x, s.fX) <= 1e-6);
    CHECK(p.constraints.delta * x.sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("multinomial covariance")
{
  const Grid grid(0.0, 2.0, 3);
  Eigen::VectorXd heights(3);
  heights << 0.4, 0.6, 0.0;
  const Eigen::MatrixXd S = multinomial_sigma({ grid, heights, 10 });
  CHECK(S(0, 0) == doctest::Approx(0.024));
  CHECK(S(0, 1) == doctest::Approx(-0.024));
  CHECK(S(1, 1) == doctest::Approx(0.024));
  CHECK(S.row(2).isZero(0.0));

  std::mt19937_64 rng(4);
  const Grid g5(0.0, 2.0, 5);
  const HistogramDensity h = oracle::random_histogram(g5, 200, rng);
  const Eigen::MatrixXd S5 = multinomial_sigma(h);
  CHECK((S5.rowwise().sum() * g5.delta()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("multinomial covariance matches simulated histograms")
{
  const int K = 5;
  const long n = 200;
  const long draws = 100000;
  const Grid grid(0.0, 2.0, K);
  Eigen::VectorXd p(K);
  p << 0.1, 0.3, 0.25, 0.2, 0.15;
  const Eigen::MatrixXd S = multinomial_sigma({ grid, p / grid.delta(), n });

  std::mt19937_64 rng(77);
  std::discrete_distribution<int> cat(p.data(), p.data() + K);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(K, K);
  Eigen::MatrixXd fourth = Eigen::MatrixXd::Zero(K, K);
  for (long d = 0; d < draws; ++d) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(K);
    for (long i = 0; i < n; ++i)
      h(cat(rng)) += 1.0;
    h /= n * grid.delta();
    const Eigen::VectorXd c = h - p / grid.delta();
    const Eigen::MatrixXd outer = c * c.transpose();
    second += outer;
    fourth += outer.cwiseProduct(outer);
  }
  second /= draws;
  fourth /= draws;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      const double se = std::sqrt((fourth(i, j) - second(i, j) * second(i, j)) / draws);
      CHECK(std::abs(second(i, j) - S(i, j)) <= 3.0 * se + 1e-15);
    }
}

TEST_CASE("covariance penalty")
{
  std::mt19937_64 rng(17);
  const DeconProblem p = oracle::gaussian_problem(15, 1.5, 0.01, RegularizerKind::SecondDerivative, rng);
  const ClosedFormSolution cf = closed_form_equality(p);
  const Eigen::MatrixXd& C = p.C.entries;
  const Eigen::MatrixXd S = multinomial_sigma(p.fY);

  // the default variant keeps only diag(p) of the multinomial covariance
  const double n = static_cast<double>(p.fY.n), d = p.fY.grid.delta();
  const Eigen::MatrixXd diagp = (d * p.fY.heights).asDiagonal();
  CHECK(sure_penalty(C, cf, p.fY) == doctest::Approx(2.0 * (C * cf.B * diagp).trace() / (n * d * d)).epsilon(1e-12));
  CHECK(sure_penalty(C, cf, p.fY, true) == doctest::Approx(2.0 * (C * cf.B * S).trace()).epsilon(1e-10));
  const double gap = sure_penalty(C, cf, p.fY, true) - sure_penalty(C, cf, p.fY);
  CHECK(gap == doctest::Approx(-2.0 * p.fY.heights.dot(C * cf.B * p.fY.heights) / n).epsilon(1e-12));

  ClosedFormSolution zero = cf;
  zero.B.setZero();
  CHECK(sure_penalty(C, zero, p.fY) == 0.0);
  CHECK(sure_penalty(C, zero, p.fY, true) == 0.0);
}

TEST_CASE("lambda grids")
{
  const auto g = default_lambda_grid();
  REQUIRE(g.size() == 61);
  CHECK(g.front() == doctest::Approx(1e-6));
  CHECK(g.back() == doctest::Approx(1e2));
  CHECK(g[30] == doctest::Approx(1e-2));
  CHECK(log_grid(0.5, 0.5, 1) == std::vector<double>{ 0.5 });
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), DeconError);
}

TEST_CASE("lambda selection")
{
  std::mt19937_64 rng(41);
  const DeconProblem p = oracle::gaussian_problem(20, 1.0, 0.0, RegularizerKind::SecondDerivative, rng);
  const SureCurve one = select_lambda(p, { 0.05 });
  CHECK(one.chosen_lambda == 0.05);
  CHECK(one.chosen_index == 0);

  const auto grid = log_grid(1e-4, 10.0, 11);
  const SureCurve c = select_lambda(p, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    REQUIRE(c.valid[k]);
    CHECK(c.sure[k] >= c.min_sure());
    CHECK(c.sure[k] == doctest::Approx(c.err[k] + c.penalty[k]));
  }
  SelectionOptions eq;
  eq.mode = SureMode::EqualityOnly;
  const SureCurve e = select_lambda(p, grid, eq);
  // equality-only fits are the closed form
  const ClosedFormSolution cf = closed_form_equality(p.equality_only().with_lambda(grid[3]));
  CHECK(e.err[3] == doctest::Approx(fit_error(p, cf.apply(p.fY.heights))).epsilon(1e-8));
  CHECK_THROWS_AS(select_lambda(p, {}), DeconError);
}

TEST_CASE("regularizer selection prefers d2 on ties")
{
  std::mt19937_64 rng(42);
  const DeconProblem p = oracle::gaussian_problem(12, 1.0, 0.0, RegularizerKind::SecondDerivative, rng);
  // at a vanishing lambda both penalties leave the same problem
  const RegularizerSelection rs =
    select_regularizer(p, Eigen::VectorXd::Constant(12, 1.0 / 12), { 1e-300 });
  CHECK(rs.second_derivative.min_sure() == rs.gaussian.min_sure());
  CHECK(rs.kind == RegularizerKind::SecondDerivative);
}

TEST_CASE("gaussian reference wins on gaussian truth")
{
  const Distribution truth(NormalDist{ 0.0, 4.0 });
  const NoiseModel noise = NoiseModel::gaussian(1.0);
  std::normal_distribution<double> nz(0.0, 1.0);
  int gauss = 0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    StreamRng rx(2024, static_cast<std::uint64_t>(r), 0);
    std::vector<double> y = truth.sample(rx, 1000);
    std::mt19937_64 rz(static_cast<std::uint64_t>(r));
    for (auto& v : y)
      v += nz(rz);
    Eigen::VectorXd ref;
    FitOptions opts;
    const DeconProblem p = build_problem(y, noise, opts, &ref);
    const RegularizerSelection rs = select_regularizer(p, ref, log_grid(1e-4, 1e2, 7));
    gauss += rs.kind == RegularizerKind::GaussianReference;
  }
  MESSAGE("gaussian reference chosen in " << gauss << " of " << reps);
  CHECK(gauss > reps / 2);
}

TEST_CASE("elbow of a scree curve")
{
  // two straight pieces in log-log space meeting at index 6
  std::vector<double> x, y;
  for (int i = 0; i < 13; ++i) {
    x.push_back(std::pow(10.0, -6.0 + 0.5 * i));
    y.push_back(i <= 6 ? std::pow(10.0, 4.0 - 0.8 * i) : std::pow(10.0, -0.8 - 0.05 * (i - 6)));
  }
  CHECK(elbow_index(x, y) == 6);
  CHECK(elbow_index(x, std::vector<double>(13, 2.0)) == 0);
  CHECK(elbow_index(x, std::vector<double>(13, 0.0)) == 0);
}

TEST_CASE("scree curve is monotone")
{
  std::mt19937_64 rng(43);
  for (auto kind : { RegularizerKind::SecondDerivative, RegularizerKind::GaussianReference }) {
    DeconProblem p = oracle::gaussian_problem(30, 2.0, 0.0, kind, rng);
    p.constraints.convex_right_from = 20;
    const ScreeCurve c = scree_curve(p, log_grid(1e-5, 1e2, 22));
    for (std::size_t k = 1; k < c.lambdas.size(); ++k) {
      CHECK(c.q_values[k] <= c.q_values[k - 1] + 1e-9);
      CHECK(c.err[k] >= c.err[k - 1] - 1e-9);
    }
    REQUIRE(c.elbow_lambda);
  }

  // a histogram the penalty already likes: the curve is flat
  const int K = 10;
  const Grid grid(0.0, 9.0, K);
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(K, 0.1);
  DeconProblem q{ ConvolutionMatrix{ grid, Eigen::MatrixXd::Identity(K, K) },
                  HistogramDensity{ grid, flat, 100 },
                  ConstraintSet::basic(K, 1.0),
                  Regularizer::second_derivative(),
                  0.0 };
  const ScreeCurve c = scree_curve(q, log_grid(1e-3, 1e1, 9));
  CHECK(*c.elbow_lambda == doctest::Approx(1e-3));
}
