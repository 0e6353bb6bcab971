#include "qpdecon/constraints.hpp"
#include "qpdecon/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace qpdecon;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r)
{
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row)
      m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v)
{
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v)
    out(i++) = x;
  return out;
}

ErrorKind kind_of(auto&& f)
{
  try {
    f();
  } catch (const DeconError& e) {
    return e.kind();
  }
  FAIL("expected a DeconError");
  return ErrorKind::InvalidSpec;
}

} // namespace

TEST_CASE("tail monotonicity rows")
{
  CHECK(monotone_rows(4, 1, MonotoneDirection::NonincreasingRight) ==
        rows({ { 0, 1, -1, 0 }, { 0, 0, 1, -1 } }));
  const Eigen::MatrixXd A = monotone_rows(4, 0, MonotoneDirection::NonincreasingRight);
  CHECK((A * vec({ 4, 3, 2, 1 })).minCoeff() == 1.0);
  const Eigen::MatrixXd B = monotone_rows(3, 0, MonotoneDirection::NonincreasingRight);
  CHECK((B * vec({ 1, 2, 1 }))(0) == -1.0);

  CHECK(monotone_rows(4, 2, MonotoneDirection::NondecreasingLeft) ==
        rows({ { -1, 1, 0, 0 }, { 0, -1, 1, 0 } }));
  CHECK(kind_of([] { monotone_rows(4, 3, MonotoneDirection::NonincreasingRight); }) ==
        ErrorKind::IndexOutOfGrid);
  CHECK(kind_of([] { monotone_rows(4, 0, MonotoneDirection::NondecreasingLeft); }) ==
        ErrorKind::IndexOutOfGrid);
}

TEST_CASE("tail convexity rows")
{
  CHECK(convex_rows(5, 1, TailSide::Right) == rows({ { 0, 1, -2, 1, 0 }, { 0, 0, 1, -2, 1 } }));
  CHECK(convex_rows(5, 3, TailSide::Left) == rows({ { 1, -2, 1, 0, 0 }, { 0, 1, -2, 1, 0 } }));
  const Eigen::MatrixXd A = convex_rows(6, 0, TailSide::Right);
  Eigen::VectorXd sq(6);
  for (int j = 0; j < 6; ++j)
    sq(j) = j * j;
  CHECK((A * sq).isConstant(2.0));
  CHECK((convex_rows(3, 0, TailSide::Right) * vec({ 0, 1, 0 }))(0) == -2.0);
  CHECK(kind_of([] { convex_rows(5, 3, TailSide::Right); }) == ErrorKind::IndexOutOfGrid);
}

TEST_CASE("unimodality rows")
{
  const Eigen::MatrixXd A = unimodal_rows(3, 1);
  CHECK(A == rows({ { -1, 1, 0 }, { 0, 1, -1 } }));
  CHECK(A * vec({ 1, 3, 1 }) == vec({ 2, 2 }));
  CHECK(A * vec({ 3, 1, 3 }) == vec({ -2, -2 }));
  CHECK(kind_of([] { unimodal_rows(3, 3); }) == ErrorKind::IndexOutOfGrid);
}

TEST_CASE("support reduction")
{
  Eigen::MatrixXd C(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      C(i, j) = 10 * i + j;
  CHECK(apply_support(C, make_support(5, 0, 4)) == C);
  const Eigen::MatrixXd R = apply_support(C, make_support(5, 1, 3));
  CHECK(R.cols() == 3);
  CHECK(R == C.middleCols(1, 3));
  CHECK(kind_of([] { make_support(5, 3, 3); }) == ErrorKind::EmptySupport);
  CHECK(kind_of([] { make_support(5, 1, 5); }) == ErrorKind::IndexOutOfGrid);

  // rows touching only dropped columns disappear
  const Eigen::MatrixXd M = monotone_rows(5, 0, MonotoneDirection::NonincreasingRight);
  const Eigen::MatrixXd kept = restrict_rows(M, make_support(5, 2, 4));
  CHECK(kept == rows({ { -1, 0, 0 }, { 1, -1, 0 }, { 0, 1, -1 } }));
}

TEST_CASE("max violation")
{
  ConstraintSet set = ConstraintSet::basic(4, 0.5);
  CHECK(max_violation(set, vec({ 0.5, 0.5, 0.5, 0.5 })) == doctest::Approx(0.0));
  CHECK(max_violation(set, vec({ 1.0, 1.0, 0.5, -0.5 })) == doctest::Approx(0.5));
  set.monotone_right_from = 0;
  CHECK(max_violation(set, vec({ 0.25, 0.75, 0.5, 0.5 })) == doctest::Approx(0.5));
  set.monotone_right_from.reset();
  set.support = make_support(4, 1, 3);
  CHECK(max_violation(set, vec({ 0.2, 0.6, 0.6, 0.6 })) == doctest::Approx(0.2).epsilon(1e-12));
  // padded reduced solution keeps the equality row
  CHECK(max_violation(set, vec({ 0.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0 })) < 1e-15);
}

TEST_CASE("constraint spec parsing")
{
  const ConstraintSpec s = ConstraintSpec::parse("in,mright:4,cleft:2,cright:6,s:0,inf");
  REQUIRE(s.mright);
  CHECK(*s.mright == 4.0);
  CHECK(*s.cleft == 2.0);
  CHECK(*s.cright == 6.0);
  REQUIRE(s.support);
  CHECK(s.support->first == 0.0);
  CHECK(std::isinf(s.support->second));
  CHECK(s.to_string() == "in,mright:4,cright:6,cleft:2,s:0,inf");
  CHECK(ConstraintSpec::parse(s.to_string()).to_string() == s.to_string());

  CHECK(ConstraintSpec::parse("in,u:auto").mode_auto);
  CHECK(*ConstraintSpec::parse("u:3.5").mode == 3.5);
  CHECK(kind_of([] { ConstraintSpec::parse("in,bogus"); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { ConstraintSpec::parse("mright:x"); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { ConstraintSpec::parse("s:3,1"); }) == ErrorKind::EmptySupport);
  CHECK(kind_of([] { ConstraintSpec::parse("s:3"); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { ConstraintSpec::parse("u:1,u:auto"); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("resolving coordinates on a grid")
{
  const Grid g(-2.0, 8.0, 11); // points -2, -1, ..., 8
  const ConstraintSet set =
    ConstraintSpec::parse("mright:4.2,mleft:0.9,cright:6,cleft:1.4,u:3,s:-0.3,100").resolve(g);
  CHECK(*set.monotone_right_from == 6);
  CHECK(*set.monotone_left_until == 3);
  CHECK(*set.convex_right_from == 8);
  CHECK(*set.convex_left_until == 3);
  CHECK(set.mode_kind == ModeKind::Known);
  CHECK(set.mode_index == 5);
  REQUIRE(set.support);
  CHECK(set.support->a == 2);
  CHECK(set.support->b == 10);

  // a support covering the whole grid is no restriction
  CHECK_FALSE(ConstraintSpec::parse("s:-inf,inf").resolve(g).support);
  // right-tail blocks snapped past their last row are dropped
  CHECK_FALSE(ConstraintSpec::parse("cright:7.9").resolve(g).convex_right_from);
  CHECK(ConstraintSpec::parse("u:auto").resolve(g).mode_kind == ModeKind::Search);
}
