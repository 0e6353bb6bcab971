#include "qpdecon/error.hpp"
#include "qpdecon/regularization.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace qpdecon;

TEST_CASE("second difference matrix")
{
  Eigen::MatrixXd expect(2, 4);
  expect << 1, -2, 1, 0, 0, 1, -2, 1;
  CHECK(second_difference_matrix(4) == expect);

  const Eigen::MatrixXd D = second_difference_matrix(7);
  Eigen::VectorXd affine(7), sq(7);
  for (int j = 0; j < 7; ++j) {
    affine(j) = 3.0 - 0.5 * j;
    sq(j) = j * j;
  }
  CHECK((D * affine).cwiseAbs().maxCoeff() == 0.0);
  CHECK((D * sq).isConstant(2.0));
}

TEST_CASE("penalty values")
{
  const Regularizer d2 = Regularizer::second_derivative();
  Eigen::VectorXd f(3);
  f << 0, 1, 0;
  CHECK(d2.penalty(f) == 4.0);
  Eigen::VectorXd affine = Eigen::VectorXd::LinSpaced(6, 1.0, 2.0);
  CHECK(d2.penalty(affine) == doctest::Approx(0.0));

  Eigen::VectorXd ref(3);
  ref << 0.1, 0.2, 0.3;
  const Regularizer g = Regularizer::gaussian(ref);
  CHECK(g.penalty(ref) == 0.0);
  CHECK(g.penalty(f) == doctest::Approx(0.01 + 0.64 + 0.09));

  // Q(f) = f'Mf - 2 r'f + ||r||^2 with M and r from the regularizer
  Eigen::VectorXd x(3);
  x << 0.4, -0.3, 0.9;
  CHECK(g.penalty(x) == doctest::Approx(x.dot(g.quadratic(3) * x) - 2 * g.target(3).dot(x) + ref.squaredNorm()));
  CHECK(d2.penalty(x) == doctest::Approx(x.dot(d2.quadratic(3) * x)));
}

TEST_CASE("restricted regularizer slices the reference")
{
  Eigen::VectorXd ref = Eigen::VectorXd::LinSpaced(6, 0.0, 5.0);
  const Regularizer g = Regularizer::gaussian(ref).restricted(2, 4);
  CHECK(g.reference().size() == 3);
  CHECK(g.reference()(0) == 2.0);
  CHECK(Regularizer::second_derivative().restricted(1, 3).kind() == RegularizerKind::SecondDerivative);
}

TEST_CASE("gaussian reference")
{
  // sample with mean 5 and sample variance 8.2
  const std::vector<double> y{ 5.0 - std::sqrt(8.2), 5.0 + std::sqrt(8.2) };
  const std::vector<double> data{ y[0], y[1], y[0], y[1] };
  // four points: sample variance is 8.2 * 4 / 3
  const double var_y = 8.2 * 4.0 / 3.0;
  const Grid grid(-5.0, 15.0, 201);
  const Eigen::VectorXd ref = gaussian_reference(data, NoiseModel::gaussian(var_y - 5.0), grid);
  for (int j : { 0, 57, 100, 150 }) {
    const double x = grid.point(j);
    CHECK(ref(j) == doctest::Approx(std::exp(-0.5 * (x - 5) * (x - 5) / 5.0) / std::sqrt(2 * M_PI * 5.0)));
  }

  // noise variance above the data variance falls back to delta^2
  const Eigen::VectorXd floor = gaussian_reference(data, NoiseModel::gaussian(100.0), grid);
  const double d = grid.delta();
  CHECK(floor(100) == doctest::Approx(1.0 / std::sqrt(2 * M_PI * d * d)));
  CHECK(floor(101) == doctest::Approx(std::exp(-0.5) / std::sqrt(2 * M_PI * d * d)));
}

TEST_CASE("regularizer names")
{
  CHECK(regularizer_from_string("d2") == RegularizerKind::SecondDerivative);
  CHECK(regularizer_from_string("gauss") == RegularizerKind::GaussianReference);
  CHECK(to_string(RegularizerKind::GaussianReference) == "gauss");
  CHECK_THROWS_AS(regularizer_from_string("tv"), DeconError);
}
